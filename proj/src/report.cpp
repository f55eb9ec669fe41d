// SPDX-License-Identifier: Apache-2.0
#include "msgl/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "msgl/errors.hpp"
#include "text.hpp"

namespace msgl {
namespace fs = std::filesystem;
using nlohmann::json;

EvalReport make_eval_report(std::string dataset, std::string split, const LabelMap& labels,
                            std::span<const int> y_true, std::span<const int> y_pred,
                            std::span<const double> probabilities) {
  EvalReport r;
  r.dataset = std::move(dataset);
  r.split = std::move(split);
  r.labels = labels;
  r.confusion = compute_confusion(y_true, y_pred, labels.size());
  r.metrics = class_report(r.confusion);
  for (std::size_t c = 0; c < labels.size(); ++c) {
    try {
      r.roc.emplace_back(roc_auc(y_true, probabilities, labels.size(), c));
    } catch (const UndefinedMetricError&) {
      r.roc.emplace_back(std::nullopt);
    }
  }
  return r;
}

std::string class_file_stem(const std::string& name) {
  std::string s = name;
  for (char& ch : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_';
    if (!ok) ch = '_';
  }
  return s;
}

namespace {

json metrics_json(const ClassMetrics& m) {
  return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

ClassMetrics metrics_from(const json& j) {
  ClassMetrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.support = j.at("support").get<std::size_t>();
  return m;
}

std::string threshold_text(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return text::format_double(t);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw PersistenceError(path.string() + ": write failed");
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Plot area 400x400 at (60, 20); x and y ranges given by the caller.
std::string line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      double xmax, const std::vector<Series>& series) {
  std::ostringstream s;
  const double x0 = 60, y0 = 20, w = 400, h = 400;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"480\" viewBox=\"0 0 620 480\">\n"
    << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\"" << h
    << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << x0 + w / 2 << "\" y=\"14\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(title)
    << "</text>\n"
    << "<text x=\"" << x0 + w / 2 << "\" y=\"455\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(xlabel)
    << "</text>\n"
    << "<text x=\"15\" y=\"" << y0 + h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 "
    << y0 + h / 2 << ")\">" << xml_escape(ylabel) << "</text>\n";
  const double span = xmax > 0 ? xmax : 1.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[k].points) {
      s << x0 + w * (x / span) << ',' << y0 + h * (1.0 - y) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"470\" y=\"" << 40 + 16 * k << "\" font-size=\"11\" fill=\"" << color << "\">"
      << xml_escape(series[k].name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string distance_text(const std::optional<std::size_t>& d) { return d ? std::to_string(*d) : "inf"; }

json tally_json(const AccuracyTally& t) { return json{{"samples", t.samples}, {"accuracy", t.accuracy()}}; }

}  // namespace

void emit_report(const EvalReport& r, const fs::path& dir, bool svg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PersistenceError(dir.string() + ": cannot create directory (" + ec.message() + ")");
  const auto& names = r.labels.names();

  json j;
  j["dataset"] = r.dataset;
  j["split"] = r.split;
  j["per_class"] = json::object();
  for (std::size_t c = 0; c < names.size(); ++c) j["per_class"][names[c]] = metrics_json(r.metrics.per_class[c]);
  j["accuracy"] = r.metrics.accuracy;
  j["weighted"] = metrics_json(r.metrics.weighted);
  j["macro_recall"] = r.metrics.macro_recall;
  j["auc"] = json::object();
  for (std::size_t c = 0; c < names.size(); ++c) {
    j["auc"][names[c]] = r.roc[c] ? json(r.roc[c]->auc) : json(nullptr);
  }
  write_file(dir / "metrics.json", j.dump(2) + "\n");

  std::ostringstream cm;
  cm << "true\\pred";
  for (const auto& n : names) cm << ',' << n;
  cm << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) {
    cm << names[i];
    for (std::size_t k = 0; k < names.size(); ++k) cm << ',' << r.confusion.at(i, k);
    cm << '\n';
  }
  write_file(dir / "confusion.csv", cm.str());

  std::vector<Series> roc_series;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (!r.roc[c]) continue;
    std::ostringstream s;
    s << "threshold,fpr,tpr\n";
    Series series{names[c] + " (AUC " + text::format_double(std::round(r.roc[c]->auc * 1000) / 1000) + ")", {}};
    for (const auto& p : r.roc[c]->points) {
      s << threshold_text(p.threshold) << ',' << text::format_double(p.fpr) << ',' << text::format_double(p.tpr)
        << '\n';
      series.points.emplace_back(p.fpr, p.tpr);
    }
    write_file(dir / ("roc_" + class_file_stem(names[c]) + ".csv"), s.str());
    roc_series.push_back(std::move(series));
  }
  if (svg) write_file(dir / "roc.svg", line_plot("ROC (one-vs-rest)", "false positive rate", "true positive rate", 1.0, roc_series));

  if (r.boundary) {
    const BoundaryReport& b = *r.boundary;
    std::ostringstream s;
    s << "distance,samples,accuracy\n";
    Series series{"accuracy", {}};
    double xmax = 0.0;
    for (const auto& bin : b.bins) {
      s << distance_text(bin.distance) << ',' << bin.samples << ',' << text::format_double(bin.accuracy()) << '\n';
      if (bin.distance) {
        series.points.emplace_back(static_cast<double>(*bin.distance), bin.accuracy());
        xmax = std::max(xmax, static_cast<double>(*bin.distance));
      }
    }
    write_file(dir / "boundary.csv", s.str());

    json bj;
    bj["transitions"] = b.transitions;
    bj["at_transition"] = tally_json(b.at_transition);
    bj["near"] = tally_json(b.near);
    bj["far"] = tally_json(b.far);
    bj["per_class"] = json::object();
    for (std::size_t c = 0; c < names.size() && c < b.class_near.size(); ++c) {
      bj["per_class"][names[c]] = json{{"near", tally_json(b.class_near[c])}, {"far", tally_json(b.class_far[c])}};
    }
    bj["confused_pairs"] = json::array();
    for (const auto& [pair, count] : b.confused_pairs) {
      bj["confused_pairs"].push_back(json{{"true", names.at(static_cast<std::size_t>(pair.first))},
                                          {"predicted", names.at(static_cast<std::size_t>(pair.second))},
                                          {"count", count}});
    }
    write_file(dir / "boundary_summary.json", bj.dump(2) + "\n");
    if (svg) {
      write_file(dir / "boundary.svg", line_plot("Accuracy by distance to transition", "frames from transition",
                                                 "accuracy", xmax, {series}));
    }
  }
}

MetricsFile load_metrics(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError(path.string() + ": cannot open");
  MetricsFile m;
  try {
    const json j = json::parse(in);
    m.dataset = j.at("dataset").get<std::string>();
    m.split = j.at("split").get<std::string>();
    for (const auto& [name, v] : j.at("per_class").items()) m.per_class[name] = metrics_from(v);
    m.accuracy = j.at("accuracy").get<double>();
    m.weighted = metrics_from(j.at("weighted"));
    m.macro_recall = j.at("macro_recall").get<double>();
    for (const auto& [name, v] : j.at("auc").items()) {
      m.auc[name] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
  } catch (const json::exception& e) {
    throw PersistenceError(path.string() + ": malformed metrics file (" + e.what() + ")");
  }
  return m;
}

}  // namespace msgl
