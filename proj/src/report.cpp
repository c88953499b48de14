#include <nodenorm/experiment.hpp>
#include <nodenorm/format.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace nodenorm {

namespace {

/// NaN and infinities become JSON null.
Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json reals(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real(v(i)));
  return a;
}

Json reals(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

std::string csv_real(double v) { return std::isnan(v) ? std::string("nan") : format_real(v); }

std::string record_name(std::size_t index, const RunRecord& r) {
  char prefix[16];
  std::snprintf(prefix, sizeof(prefix), "run%03zu", index);
  std::string variant = r.variant;
  std::replace(variant.begin(), variant.end(), '+', '_');
  return std::string(prefix) + "_" + variant + "_L" + std::to_string(r.depth) + "_s" + std::to_string(r.seed) +
         ".json";
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Minimal line chart: linear axes, one polyline per series, legend on the right.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

  const double left = 70, top = 40, width = 520, height = 340;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * width; };
  auto sy = [&](double y) { return top + height - (y - y0) / (y1 - y0) * height; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"440\" font-family=\"sans-serif\" "
         "font-size=\"12\">\n";
  svg << "<rect width=\"800\" height=\"440\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0;
    const double yv = y0 + (y1 - y0) * t / 4.0;
    svg << "<text x=\"" << sx(xv) << "\" y=\"" << top + height + 16 << "\" text-anchor=\"middle\">"
        << format_real(std::round(xv * 1000) / 1000) << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
        << format_real(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  svg << "<text x=\"" << left + width / 2 << "\" y=\"" << top + height + 34 << "\" text-anchor=\"middle\">"
      << x_label << "</text>\n";
  svg << "<text transform=\"translate(18," << top + height / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[k].points) {
      if (std::isfinite(x) && std::isfinite(y)) svg << sx(x) << "," << sy(y) << " ";
    }
    svg << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    svg << "<rect x=\"610\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"628\" y=\"" << ly + 1 << "\">" << series[k].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<Series> accuracy_series(const std::vector<AggregateRow>& rows) {
  std::vector<Series> series;
  std::map<std::string, std::size_t> index;
  for (const auto& row : rows) {
    if (std::isnan(row.mean_test_acc)) continue;
    auto it = index.find(row.variant);
    if (it == index.end()) {
      it = index.emplace(row.variant, series.size()).first;
      series.push_back({row.variant, {}});
    }
    series[it->second].points.emplace_back(row.depth, row.mean_test_acc);
  }
  for (auto& s : series) std::sort(s.points.begin(), s.points.end());
  return series;
}

/// Mean log10 node variance per layer, averaged over seeds, for the deepest
/// run of each variant.
std::vector<Series> variance_series(const std::vector<RunRecord>& records) {
  std::map<std::string, int> deepest;
  for (const auto& r : records) {
    if (r.ok() && r.variance) deepest[r.variant] = std::max(deepest[r.variant], r.depth);
  }
  std::vector<Series> series;
  for (const auto& [variant, depth] : deepest) {
    std::vector<double> sum(static_cast<std::size_t>(depth), 0.0);
    int count = 0;
    for (const auto& r : records) {
      if (!r.ok() || !r.variance || r.variant != variant || r.depth != depth) continue;
      const auto logs = r.variance->log10();
      for (std::size_t l = 0; l < logs.size() && l < sum.size(); ++l) {
        const Vector& v = logs[l];
        double mean = 0.0;
        Eigen::Index finite = 0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
          if (std::isfinite(v(i))) {
            mean += v(i);
            ++finite;
          }
        }
        sum[l] += finite > 0 ? mean / static_cast<double>(finite) : NAN;
      }
      ++count;
    }
    Series s{variant + " (L=" + std::to_string(depth) + ")", {}};
    for (std::size_t l = 0; l < sum.size(); ++l) s.points.emplace_back(static_cast<double>(l + 1), sum[l] / count);
    series.push_back(std::move(s));
  }
  return series;
}

std::vector<Series> bin_series(const std::vector<RunRecord>& records) {
  std::map<std::string, std::pair<std::vector<double>, int>> sums;
  for (const auto& r : records) {
    if (!r.ok() || !r.bins) continue;
    auto& [sum, count] = sums[r.variant];
    sum.resize(r.bins->gap.size(), 0.0);
    for (std::size_t b = 0; b < r.bins->gap.size(); ++b) sum[b] += r.bins->gap[b];
    ++count;
  }
  std::vector<Series> series;
  for (const auto& [variant, entry] : sums) {
    Series s{variant, {}};
    for (std::size_t b = 0; b < entry.first.size(); ++b) {
      s.points.emplace_back(static_cast<double>(b + 1), entry.first[b] / entry.second);
    }
    series.push_back(std::move(s));
  }
  return series;
}

}  // namespace

Json to_json(const RunRecord& r) {
  Json j;
  j["format_version"] = kRecordFormatVersion;
  j["variant"] = r.variant;
  j["depth"] = r.depth;
  j["seed"] = r.seed;
  j["status"] = r.status;
  j["config"] = r.config;
  j["test_acc"] = real(r.test_acc);
  j["wall_seconds"] = r.wall_seconds;
  Json history = Json::array();
  for (const auto& m : r.history) {
    history.push_back({{"train_loss", real(m.train_loss)},
                       {"train_acc", real(m.train_acc)},
                       {"val_loss", real(m.val_loss)},
                       {"val_acc", real(m.val_acc)}});
  }
  j["history"] = std::move(history);
  j["gaps"] = {{"acc_gap", real(r.gaps.acc_gap)}, {"loss_gap", real(r.gaps.loss_gap)}};
  if (r.variance) {
    Json layers = Json::array();
    for (std::size_t l = 0; l < r.variance->per_layer.size(); ++l) {
      layers.push_back({{"layer", r.variance->layer_indices[l]}, {"node_variance", reals(r.variance->per_layer[l])}});
    }
    j["variance_profile"] = std::move(layers);
  }
  if (r.lipschitz) {
    j["lipschitz"] = {{"value", real(r.lipschitz->value)},
                      {"exact", r.lipschitz->exact},
                      {"pairs_used", r.lipschitz->pairs_used},
                      {"pairs_skipped", r.lipschitz->pairs_skipped}};
  }
  if (!r.correlation_norms.empty()) j["correlation_norms"] = reals(r.correlation_norms);
  if (r.bins) {
    j["bins"] = {{"acc_shallow", reals(r.bins->acc_shallow)},
                 {"acc_deep", reals(r.bins->acc_deep)},
                 {"gap", reals(r.bins->gap)},
                 {"sizes", Json::array()}};
    for (const auto& bin : r.bins->bins) j["bins"]["sizes"].push_back(bin.size());
  }
  return j;
}

std::string results_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "run,variant,depth,seed,status,test_acc,train_loss,train_acc,val_loss,val_acc,acc_gap,loss_gap,"
         "lipschitz\n";
  for (std::size_t k = 0; k < records.size(); ++k) {
    const RunRecord& r = records[k];
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << k << ',' << r.variant << ',' << r.depth << ',' << r.seed << ',' << status << ',';
    if (r.ok() && !r.history.empty()) {
      const EpochMetrics& last = r.history.back();
      out << csv_real(r.test_acc) << ',' << csv_real(last.train_loss) << ',' << csv_real(last.train_acc) << ','
          << csv_real(last.val_loss) << ',' << csv_real(last.val_acc) << ',' << csv_real(r.gaps.acc_gap) << ','
          << csv_real(r.gaps.loss_gap) << ',' << (r.lipschitz ? csv_real(r.lipschitz->value) : "");
    } else {
      out << ",,,,,,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "variant,depth,runs,failed,mean_test_acc,std_test_acc\n";
  for (const auto& row : rows) {
    out << row.variant << ',' << row.depth << ',' << row.runs << ',' << row.failed << ','
        << csv_real(row.mean_test_acc) << ',' << csv_real(row.std_test_acc) << '\n';
  }
  return out.str();
}

ReportManifest emit_reports(const std::vector<RunRecord>& records, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "records");
  fs::create_directories(out_dir / "figures");
  ReportManifest manifest;

  write_text(out_dir / "results.csv", results_csv(records));
  manifest.written.push_back("results.csv");
  const auto rows = aggregate(records);
  write_text(out_dir / "aggregate.csv", aggregate_csv(rows));
  manifest.written.push_back("aggregate.csv");

  for (std::size_t k = 0; k < records.size(); ++k) {
    const std::string name = "records/" + record_name(k, records[k]);
    write_text(out_dir / name, to_json(records[k]).dump(2) + "\n");
    manifest.written.push_back(name);
  }

  auto figure = [&](const std::string& name, const std::vector<Series>& series, const std::string& reason,
                    const std::string& title, const std::string& x_label, const std::string& y_label) {
    const std::string path = "figures/" + name;
    if (series.empty()) {
      manifest.skipped.emplace_back(path, reason);
      return;
    }
    write_text(out_dir / path, line_chart(title, x_label, y_label, series));
    manifest.written.push_back(path);
  };
  figure("accuracy_vs_depth.svg", accuracy_series(rows), "no successful runs", "Test accuracy vs depth", "layers",
         "mean test accuracy");
  figure("variance_profile.svg", variance_series(records), "variance profile diagnostic not enabled",
         "Node variance per layer", "layer", "mean log10 node variance");
  figure("bin_gaps.svg", bin_series(records), "bins need a sweep over at least two depths with bins enabled",
         "Accuracy drop per variance bin", "bin (low to high variance)", "shallow - deep accuracy");

  Json m;
  m["written"] = manifest.written;
  m["skipped"] = Json::object();
  for (const auto& [file, reason] : manifest.skipped) m["skipped"][file] = reason;
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
  return manifest;
}

}  // namespace nodenorm
