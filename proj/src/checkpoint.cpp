#include <nodenorm/checkpoint.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nodenorm/errors.hpp>

namespace nodenorm {

namespace {

constexpr std::array<char, 8> kMagic{'N', 'O', 'D', 'E', 'N', 'O', 'R', 'M'};
constexpr int kFormatVersion = 1;

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw IoError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
  }
}

Matrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<double>(read_u64(in));
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"depth", spec.depth},
          {"input_dim", spec.input_dim},
          {"hidden_dim", spec.hidden_dim},
          {"num_classes", spec.num_classes},
          {"architecture", to_string(spec.architecture)},
          {"norm", spec.norm.name()},
          {"placement", to_string(spec.placement)},
          {"residual", spec.residual},
          {"dropout_rate", spec.dropout_rate}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.depth = j.at("depth").get<int>();
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden_dim = j.at("hidden_dim").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.architecture = parse_architecture(j.at("architecture").get<std::string>());
    spec.norm = NormKind::parse(j.at("norm").get<std::string>());
    spec.placement = parse_placement(j.at("placement").get<std::string>());
    spec.residual = j.at("residual").get<bool>();
    spec.dropout_rate = j.at("dropout_rate").get<double>();
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint model spec is malformed: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file) {
  const Model& model = checkpoint.model;
  nlohmann::json tensors = nlohmann::json::array();
  auto describe = [&](const std::string& prefix, const std::vector<Matrix>& list) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      tensors.push_back({{"name", prefix + std::to_string(k)}, {"rows", list[k].rows()}, {"cols", list[k].cols()}});
    }
  };
  describe("weight", model.weights);
  describe("alpha", model.norm_alpha);
  describe("beta", model.norm_beta);

  const nlohmann::json header = {{"format_version", kFormatVersion},
                                 {"model", to_json(model.spec)},
                                 {"tensors", tensors},
                                 {"config", checkpoint.config}};
  const std::string text = header.dump();

  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + file.string());
  out.write(kMagic.data(), kMagic.size());
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& m : model.weights) write_matrix(out, m);
  for (const auto& m : model.norm_alpha) write_matrix(out, m);
  for (const auto& m : model.norm_beta) write_matrix(out, m);
  if (!out) throw IoError("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + file.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(file.string() + " is not a checkpoint");
  const std::uint64_t length = read_u64(in);
  if (length > (std::uint64_t{1} << 32)) throw IoError("checkpoint header is implausibly large");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw IoError("checkpoint truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("checkpoint header is not JSON: ") + e.what());
  }
  if (header.value("format_version", 0) != kFormatVersion) {
    throw IoError("unsupported checkpoint format version");
  }

  Checkpoint checkpoint;
  checkpoint.config = header.value("config", nlohmann::json());
  const ModelSpec spec = model_spec_from_json(header.at("model"));
  // Build an empty model to learn the expected tensor shapes.
  Rng scratch(0);
  const Model shape = build_model(spec, scratch);
  checkpoint.model.spec = spec;

  const auto& tensors = header.at("tensors");
  const std::size_t expected = shape.weights.size() + shape.norm_alpha.size() + shape.norm_beta.size();
  if (tensors.size() != expected) throw IoError("checkpoint tensor count does not match its model");
  std::size_t k = 0;
  auto load_list = [&](const std::vector<Matrix>& reference, std::vector<Matrix>& target) {
    for (const auto& ref : reference) {
      const auto rows = tensors[k].at("rows").get<Eigen::Index>();
      const auto cols = tensors[k].at("cols").get<Eigen::Index>();
      if (rows != ref.rows() || cols != ref.cols()) throw IoError("checkpoint tensor shape does not match its model");
      target.push_back(read_matrix(in, rows, cols));
      ++k;
    }
  };
  load_list(shape.weights, checkpoint.model.weights);
  load_list(shape.norm_alpha, checkpoint.model.norm_alpha);
  load_list(shape.norm_beta, checkpoint.model.norm_beta);
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint has trailing bytes");
  return checkpoint;
}

}  // namespace nodenorm
