// Copyright 2026 The UDA Forge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uda_forge/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace uda {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  return cells;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kParse, where + ": not a number: '" + s + "'");
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<Box>& gts) {
  MatchResult r;
  r.detection_is_tp.assign(dets.size(), false);
  r.gt_hit.assign(gts.size(), false);
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  for (std::size_t idx : r.order) {
    const Box& d = dets[idx].box;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_hit[g]) continue;
      const Box& gt = gts[g];
      if (gt.x_lo() <= d.cx && d.cx <= gt.x_hi() && gt.y_lo() <= d.cy && d.cy <= gt.y_hi()) {
        r.gt_hit[g] = true;
        r.detection_is_tp[idx] = true;
        break;
      }
    }
    (r.detection_is_tp[idx] ? r.tp : r.fp) += 1;
  }
  return r;
}

FrocCurve froc(const std::vector<std::vector<Detection>>& dets_per_image,
               const std::vector<std::vector<Box>>& gts_per_image,
               const std::vector<double>& fpi_points) {
  require(!gts_per_image.empty(), ErrorCode::kInvalidArgument, "froc: no images");
  require(dets_per_image.size() == gts_per_image.size(), ErrorCode::kInvalidArgument,
          "froc: detections and ground truth cover different image counts");
  require(std::is_sorted(fpi_points.begin(), fpi_points.end()), ErrorCode::kInvalidArgument,
          "froc: FPI points must be ascending");

  FrocCurve curve;
  curve.n_images = static_cast<int>(gts_per_image.size());
  for (const auto& g : gts_per_image) curve.n_gt_boxes += static_cast<int>(g.size());

  // Greedy matching visits detections by descending score, so a detection's
  // TP/FP status does not depend on which lower-scored ones survive a
  // threshold. One full matching per image is enough for the sweep.
  std::vector<std::pair<double, bool>> scored;
  for (std::size_t i = 0; i < gts_per_image.size(); ++i) {
    const MatchResult m = match_detections(dets_per_image[i], gts_per_image[i]);
    for (std::size_t d = 0; d < dets_per_image[i].size(); ++d) {
      scored.emplace_back(dets_per_image[i][d].score, m.detection_is_tp[d]);
    }
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  const double n_images = curve.n_images;
  const double n_gt = curve.n_gt_boxes;
  auto recall_of = [&](int tp) { return n_gt > 0 ? tp / n_gt : 0.0; };
  curve.operating.push_back({0.0, 0.0});
  int tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const double s = scored[i].first;
    for (; i < scored.size() && scored[i].first == s; ++i) (scored[i].second ? tp : fp) += 1;
    curve.operating.push_back({fp / n_images, recall_of(tp)});
  }

  for (double allowance : fpi_points) {
    double best = 0.0;
    for (const FrocPoint& op : curve.operating) {
      if (op.fpi <= allowance) best = std::max(best, op.recall);
    }
    curve.points.push_back({allowance, best});
  }
  return curve;
}

double recall_at(const FrocCurve& curve, double fpi) {
  for (const FrocPoint& p : curve.points) {
    if (p.fpi == fpi) return p.recall;
  }
  fail(ErrorCode::kNotFound, "FROC curve has no point at FPI " + fmt(fpi));
}

ImageMetrics image_metrics(const std::vector<std::vector<Detection>>& dets_per_image,
                           const std::vector<std::vector<Box>>& gts_per_image,
                           double score_threshold) {
  require(dets_per_image.size() == gts_per_image.size(), ErrorCode::kInvalidArgument,
          "image_metrics: detections and ground truth cover different image counts");
  ImageMetrics m;
  for (std::size_t i = 0; i < gts_per_image.size(); ++i) {
    const bool predicted = std::any_of(dets_per_image[i].begin(), dets_per_image[i].end(),
                                       [&](const Detection& d) { return d.score >= score_threshold; });
    const bool truth = !gts_per_image[i].empty();
    if (predicted && truth) ++m.tp;
    else if (predicted) ++m.fp;
    else if (truth) ++m.fn;
    else ++m.tn;
  }
  const int n = m.tp + m.fp + m.fn + m.tn;
  m.accuracy = n > 0 ? static_cast<double>(m.tp + m.tn) / n : 0.0;
  const double precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  const double recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  return m;
}

void write_froc_csv(const FrocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "fpi,recall\n";
  for (const FrocPoint& p : curve.points) out << fmt(p.fpi) << ',' << fmt(p.recall) << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failure on " + path.string());
}

std::vector<FrocPoint> read_froc_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kNotFound, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "fpi,recall", ErrorCode::kParse, path.string() + ": expected header fpi,recall");
  std::vector<FrocPoint> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    require(cells.size() == 2, ErrorCode::kParse, where + ": expected 2 fields");
    points.push_back({to_double(cells[0], where), to_double(cells[1], where)});
  }
  return points;
}

std::string render_froc_svg(const std::vector<LabeledCurve>& curves) {
  constexpr double kWidth = 640, kHeight = 480;
  constexpr double kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  double max_fpi = 0;
  for (const auto& c : curves) {
    for (const auto& p : c.points) max_fpi = std::max(max_fpi, p.fpi);
  }
  if (max_fpi <= 0) max_fpi = 1;
  auto sx = [&](double fpi) { return kLeft + plot_w * fpi / max_fpi; };
  auto sy = [&](double recall) { return kTop + plot_h * (1.0 - recall); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
      << "\" y2=\"" << kTop + plot_h << "\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kTop + plot_h << "\"/>\n</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fpi = max_fpi * i / 4.0, recall = i / 4.0;
    svg << "<text x=\"" << sx(fpi) << "\" y=\"" << kTop + plot_h + 16
        << "\" text-anchor=\"middle\">" << fmt_short(fpi) << "</text>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(recall) + 4
        << "\" text-anchor=\"end\">" << fmt_short(recall) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\">False positives per image</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + plot_h / 2 << ")\">Sensitivity</text>\n</g>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % (sizeof kColors / sizeof kColors[0])];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < curves[i].points.size(); ++k) {
      if (k) svg << ' ';
      svg << sx(curves[i].points[k].fpi) << ',' << sy(curves[i].points[k].recall);
    }
    svg << "\"/>\n";
    const double ly = kTop + 16 + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << kLeft + plot_w + 12 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << kLeft + plot_w + 32 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + plot_w + 38 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(curves[i].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_froc_svg(const std::vector<LabeledCurve>& curves, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << render_froc_svg(curves);
  require(static_cast<bool>(out), ErrorCode::kIo, "write failure on " + path.string());
}

void write_detections_csv(const std::vector<std::vector<Detection>>& dets_per_image,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "image_id,cx,cy,w,h,score\n";
  for (std::size_t i = 0; i < dets_per_image.size(); ++i) {
    for (const Detection& d : dets_per_image[i]) {
      out << i << ',' << fmt(d.box.cx) << ',' << fmt(d.box.cy) << ',' << fmt(d.box.w) << ','
          << fmt(d.box.h) << ',' << fmt(d.score) << '\n';
    }
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failure on " + path.string());
}

std::vector<std::vector<Detection>> read_detections_csv(const std::filesystem::path& path,
                                                        std::size_t n_images) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kNotFound, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "image_id,cx,cy,w,h,score", ErrorCode::kParse,
          path.string() + ": expected header image_id,cx,cy,w,h,score");
  std::vector<std::vector<Detection>> out(n_images);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    require(cells.size() == 6, ErrorCode::kParse, where + ": expected 6 fields");
    const double id = to_double(cells[0], where);
    require(id >= 0 && id < static_cast<double>(n_images) && id == static_cast<double>(static_cast<std::size_t>(id)),
            ErrorCode::kParse, where + ": image_id out of range");
    Detection d;
    d.box = {to_double(cells[1], where), to_double(cells[2], where), to_double(cells[3], where),
             to_double(cells[4], where)};
    d.score = to_double(cells[5], where);
    out[static_cast<std::size_t>(id)].push_back(d);
  }
  return out;
}

}  // namespace uda
