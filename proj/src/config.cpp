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

#include "uda_forge/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <variant>
#include <vector>

namespace uda {
namespace {

// A parsed right-hand side. Numbers keep their source text so integers are
// read exactly.
struct Number {
  std::string text;
};
using Value = std::variant<Number, bool, std::string, std::vector<Number>>;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool looks_numeric(std::string_view s) {
  if (s.empty()) return false;
  double v = 0;
  std::string buf(s);
  if (buf.front() == '+') buf.erase(0, 1);
  const auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() && ptr == buf.data() + buf.size();
}

Value parse_value(std::string_view raw) {
  const std::string_view s = trim(raw);
  if (s.empty()) throw std::invalid_argument("missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw std::invalid_argument("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char c = s[++i];
        out.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw std::invalid_argument("unterminated array");
    std::vector<Number> items;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const std::string_view item = trim(body.substr(0, comma));
      if (item.empty()) {
        if (comma == std::string_view::npos) break;  // trailing comma
        throw std::invalid_argument("empty array element");
      }
      if (!looks_numeric(item)) throw std::invalid_argument("array elements must be numbers");
      items.push_back({std::string(item)});
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return items;
  }
  if (!looks_numeric(s)) throw std::invalid_argument("cannot parse value '" + std::string(s) + "'");
  return Number{std::string(s)};
}

double as_double(const Number& n) {
  std::string buf = n.text;
  if (!buf.empty() && buf.front() == '+') buf.erase(0, 1);
  double v = 0;
  std::from_chars(buf.data(), buf.data() + buf.size(), v);
  if (!std::isfinite(v)) throw std::invalid_argument("value must be finite");
  return v;
}

template <typename Int>
Int as_integer(const Number& n) {
  std::string buf = n.text;
  if (!buf.empty() && buf.front() == '+') buf.erase(0, 1);
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc() || ptr != buf.data() + buf.size()) {
    throw std::invalid_argument("expected an integer, got '" + n.text + "'");
  }
  return v;
}

template <typename T>
const T& expect(const Value& v, const char* what) {
  if (const T* p = std::get_if<T>(&v)) return *p;
  throw std::invalid_argument(std::string("expected ") + what);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Keep doubles recognizable as floats in the dump.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <std::size_t N>
std::string num_array(const std::array<double, N>& a) {
  std::string out = "[";
  for (std::size_t i = 0; i < N; ++i) out += (i ? ", " : "") + num(a[i]);
  return out + "]";
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const Value&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Field real(std::string key, double RunConfig::*m) {
  return {std::move(key), [m](RunConfig& c, const Value& v) { c.*m = as_double(expect<Number>(v, "a number")); },
          [m](const RunConfig& c) { return num(c.*m); }};
}

Field integer(std::string key, int RunConfig::*m) {
  return {std::move(key),
          [m](RunConfig& c, const Value& v) { c.*m = as_integer<int>(expect<Number>(v, "an integer")); },
          [m](const RunConfig& c) { return std::to_string(c.*m); }};
}

Field flag(std::string key, bool RunConfig::*m) {
  return {std::move(key), [m](RunConfig& c, const Value& v) { c.*m = expect<bool>(v, "true or false"); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

using SpecMember = DomainSpec RunConfig::*;

Field spec_real(const std::string& section, SpecMember s, double DomainSpec::*m, const char* key) {
  return {section + "." + key,
          [s, m](RunConfig& c, const Value& v) { (c.*s).*m = as_double(expect<Number>(v, "a number")); },
          [s, m](const RunConfig& c) { return num((c.*s).*m); }};
}

template <std::size_t N>
Field spec_array(const std::string& section, SpecMember s, std::array<double, N> DomainSpec::*m,
                 const char* key) {
  return {section + "." + key,
          [s, m](RunConfig& c, const Value& v) {
            const auto& items = expect<std::vector<Number>>(v, "an array of numbers");
            if (items.size() != N) {
              throw std::invalid_argument("expected " + std::to_string(N) + " elements");
            }
            for (std::size_t i = 0; i < N; ++i) ((c.*s).*m)[i] = as_double(items[i]);
          },
          [s, m](const RunConfig& c) { return num_array((c.*s).*m); }};
}

void add_spec_fields(std::vector<Field>& f, const std::string& section, SpecMember s) {
  f.push_back(spec_real(section, s, &DomainSpec::background_mean, "background_mean"));
  f.push_back(spec_real(section, s, &DomainSpec::background_noise_sd, "background_noise_sd"));
  f.push_back(spec_array(section, s, &DomainSpec::lesion_intensity, "lesion_intensity_range"));
  f.push_back(spec_array(section, s, &DomainSpec::lesion_radius, "lesion_radius_range"));
  f.push_back(spec_array(section, s, &DomainSpec::lesion_count_probs, "lesion_count_distribution"));
  f.push_back(spec_real(section, s, &DomainSpec::global_contrast, "global_contrast"));
  f.push_back(spec_real(section, s, &DomainSpec::blur_sigma, "blur_sigma"));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"seed",
                 [](RunConfig& c, const Value& v) {
                   c.seed = as_integer<std::uint64_t>(expect<Number>(v, "an integer"));
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back(integer("n_source", &RunConfig::n_source));
    f.push_back(integer("n_target", &RunConfig::n_target));
    f.push_back(integer("n_source_holdout", &RunConfig::n_source_holdout));
    f.push_back(real("strong_blur_sigma", &RunConfig::strong_blur_sigma));
    f.push_back(real("strong_contrast_lo", &RunConfig::strong_contrast_lo));
    f.push_back(real("strong_contrast_hi", &RunConfig::strong_contrast_hi));
    f.push_back(flag("strong_downscale", &RunConfig::strong_downscale));
    f.push_back(integer("batch_size", &RunConfig::batch_size));
    f.push_back(real("lr", &RunConfig::lr));
    f.push_back(real("lr_backbone", &RunConfig::lr_backbone));
    f.push_back(real("pretrain_lr", &RunConfig::pretrain_lr));
    f.push_back(real("pretrain_lr_backbone", &RunConfig::pretrain_lr_backbone));
    f.push_back(integer("e_pre", &RunConfig::e_pre));
    f.push_back(integer("e_teach", &RunConfig::e_teach));
    f.push_back(integer("e_decay", &RunConfig::e_decay));
    f.push_back(integer("e_reinit", &RunConfig::e_reinit));
    f.push_back(real("mu0", &RunConfig::mu0));
    f.push_back(real("mu_min", &RunConfig::mu_min));
    f.push_back(real("mu_max", &RunConfig::mu_max));
    f.push_back(real("eta_min", &RunConfig::eta_min));
    f.push_back(real("eta_max", &RunConfig::eta_max));
    f.push_back(integer("t_i", &RunConfig::t_i));
    f.push_back(real("ema_beta_lbar", &RunConfig::ema_beta_lbar));
    f.push_back(real("fixed_mask_ratio", &RunConfig::fixed_mask_ratio));
    f.push_back(real("gamma_ema", &RunConfig::gamma_ema));
    f.push_back(real("c_soft", &RunConfig::c_soft));
    f.push_back(real("c_hard", &RunConfig::c_hard));
    f.push_back(real("alpha_acr", &RunConfig::alpha_acr));
    f.push_back(integer("e_total", &RunConfig::e_total));
    f.push_back(real("lambda_unsup", &RunConfig::lambda_unsup));
    f.push_back(real("lambda_mask", &RunConfig::lambda_mask));
    f.push_back(real("beta_bac", &RunConfig::beta_bac));
    f.push_back(real("beta_enc", &RunConfig::beta_enc));
    f.push_back(real("beta_dec", &RunConfig::beta_dec));
    f.push_back(real("grl_lambda", &RunConfig::grl_lambda));
    f.push_back(flag("mask_loss_masked_only", &RunConfig::mask_loss_masked_only));
    f.push_back(flag("enable_ma", &RunConfig::enable_ma));
    f.push_back(flag("enable_acr", &RunConfig::enable_acr));
    f.push_back(flag("enable_adv", &RunConfig::enable_adv));
    f.push_back(flag("enable_selective", &RunConfig::enable_selective));
    f.push_back(real("eval_score_threshold", &RunConfig::eval_score_threshold));
    f.push_back(real("nms_iou", &RunConfig::nms_iou));
    f.push_back(real("image_score_threshold", &RunConfig::image_score_threshold));
    f.push_back({"fpi_points",
                 [](RunConfig& c, const Value& v) {
                   const auto& items = expect<std::vector<Number>>(v, "an array of numbers");
                   c.fpi_points.clear();
                   for (const Number& n : items) c.fpi_points.push_back(as_double(n));
                 },
                 [](const RunConfig& c) {
                   std::string out = "[";
                   for (std::size_t i = 0; i < c.fpi_points.size(); ++i) {
                     out += (i ? ", " : "") + num(c.fpi_points[i]);
                   }
                   return out + "]";
                 }});
    f.push_back(flag("epoch_froc", &RunConfig::epoch_froc));
    f.push_back({"ablation_seeds",
                 [](RunConfig& c, const Value& v) {
                   const auto& items = expect<std::vector<Number>>(v, "an array of integers");
                   c.ablation_seeds.clear();
                   for (const Number& n : items) c.ablation_seeds.push_back(as_integer<std::uint64_t>(n));
                 },
                 [](const RunConfig& c) {
                   std::string out = "[";
                   for (std::size_t i = 0; i < c.ablation_seeds.size(); ++i) {
                     out += (i ? ", " : "") + std::to_string(c.ablation_seeds[i]);
                   }
                   return out + "]";
                 }});
    add_spec_fields(f, "source", &RunConfig::source);
    add_spec_fields(f, "target", &RunConfig::target);
    return f;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& origin) {
  RunConfig config;
  std::string section;
  std::vector<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(strip_comment(text.substr(pos, end - pos)));
    pos = end + 1;
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::kParse, where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      require(section == "source" || section == "target", ErrorCode::kParse,
              where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorCode::kParse, where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    require(!key.empty(), ErrorCode::kParse, where + "missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    const Field* field = find_field(full);
    require(field != nullptr, ErrorCode::kParse, where + "unknown key '" + full + "'");
    require(std::find(seen.begin(), seen.end(), full) == seen.end(), ErrorCode::kParse,
            where + "duplicate key '" + full + "'");
    seen.push_back(full);
    try {
      field->set(config, parse_value(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::kParse, where + full + ": " + e.what());
    } catch (const std::out_of_range& e) {
      fail(ErrorCode::kParse, where + full + ": value out of range");
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kNotFound, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string field_section = dot == std::string::npos ? "" : f.key.substr(0, dot);
    if (field_section != section) {
      section = field_section;
      out += "\n[" + section + "]\n";
    }
    out += (dot == std::string::npos ? f.key : f.key.substr(dot + 1)) + " = " + f.get(config) + "\n";
  }
  return out;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const Field* field = find_field(key);
  require(field != nullptr, ErrorCode::kInvalidArgument, "unknown key '" + std::string(key) + "'");
  try {
    field->set(config, parse_value(value));
  } catch (const std::invalid_argument& e) {
    fail(ErrorCode::kInvalidArgument, std::string(key) + ": " + e.what());
  }
}

}  // namespace uda
