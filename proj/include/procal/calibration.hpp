// Copyright 2026 The procal-sim Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "procal/correlator.hpp"
#include "procal/text_config.hpp"

namespace procal {

inline constexpr int max_poly_degree = 8;

/// f(d) = sum c_k t^k with t = (d - center) / half_range.
struct Polynomial
{
  double center = 0.0;
  double half_range = 1.0;
  std::vector<double> coeffs;

  [[nodiscard]] int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  [[nodiscard]] double operator()(double p_d) const
  {
    const double t = (p_d - center) / half_range;
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
      acc = acc * t + *it;
    }
    return acc;
  }

  /// Coefficients in powers of d itself, constant first.
  [[nodiscard]] std::vector<double> raw_coefficients() const
  {
    // t = a d + b
    const double a = 1.0 / half_range;
    const double b = -center / half_range;
    std::vector<double> raw(coeffs.size(), 0.0);
    std::vector<double> power{ 1.0 };  // coefficients of t^k in d
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      for (std::size_t m = 0; m < power.size(); ++m) {
        raw[m] += coeffs[k] * power[m];
      }
      std::vector<double> next(power.size() + 1, 0.0);
      for (std::size_t m = 0; m < power.size(); ++m) {
        next[m] += b * power[m];
        next[m + 1] += a * power[m];
      }
      power = std::move(next);
    }
    return raw;
  }
};

/// Piecewise-linear correction, flat beyond the end breakpoints.
struct LookupTable
{
  std::vector<double> breakpoints;
  std::vector<double> corrections;

  [[nodiscard]] double operator()(double p_d) const
  {
    if (p_d <= breakpoints.front()) {
      return corrections.front();
    }
    if (p_d >= breakpoints.back()) {
      return corrections.back();
    }
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), p_d);
    const auto hi = static_cast<std::size_t>(it - breakpoints.begin());
    const auto lo = hi - 1;
    if (p_d == breakpoints[lo]) {
      return corrections[lo];
    }
    const double w = (p_d - breakpoints[lo]) / (breakpoints[hi] - breakpoints[lo]);
    return corrections[lo] + w * (corrections[hi] - corrections[lo]);
  }
};

using CalibrationModel = std::variant<Polynomial, LookupTable>;

inline double apply(const CalibrationModel& p_model, double p_dut)
{
  return std::visit([p_dut](const auto& p_f) { return p_f(p_dut); }, p_model);
}

inline std::string describe(const CalibrationModel& p_model)
{
  if (const auto* poly = std::get_if<Polynomial>(&p_model)) {
    return fmt::format("poly:{}", poly->degree());
  }
  return fmt::format("lut:{}", std::get<LookupTable>(p_model).breakpoints.size());
}

/**
 * @brief Least-squares polynomial through column-pivoted QR.
 *
 * Inputs are mapped onto [-1, 1] before the Vandermonde matrix is formed.
 */
inline Polynomial fit_polynomial(std::span<const Pair> p_pairs, int p_degree)
{
  if (p_degree < 0 || p_degree > max_poly_degree) {
    throw ValidationError(fmt::format("polynomial degree must be in [0, {}]", max_poly_degree));
  }
  const auto n = static_cast<Eigen::Index>(p_pairs.size());
  if (n < p_degree + 1) {
    throw DomainError(fmt::format(
      "degree {} needs at least {} pairs, got {}", p_degree, p_degree + 1, n));
  }
  double lo = p_pairs.front().dut_value;
  double hi = lo;
  for (const auto& p : p_pairs) {
    lo = std::min(lo, p.dut_value);
    hi = std::max(hi, p.dut_value);
  }
  Polynomial poly;
  poly.center = 0.5 * (lo + hi);
  poly.half_range = hi > lo ? 0.5 * (hi - lo) : 1.0;

  Eigen::MatrixXd vander(n, p_degree + 1);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = p_pairs[static_cast<std::size_t>(i)];
    const double t = (p.dut_value - poly.center) / poly.half_range;
    double power = 1.0;
    for (int k = 0; k <= p_degree; ++k) {
      vander(i, k) = power;
      power *= t;
    }
    rhs(i) = p.ref_value;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vander);
  if (qr.rank() < p_degree + 1) {
    throw DomainError(fmt::format(
      "rank-deficient fit: degree {} needs {} distinct device readings, the "
      "design matrix has rank {}",
      p_degree,
      p_degree + 1,
      qr.rank()));
  }
  const Eigen::VectorXd solution = qr.solve(rhs);
  poly.coeffs.assign(solution.data(), solution.data() + solution.size());
  return poly;
}

/**
 * @brief Piecewise-linear table fitted by least squares.
 *
 * Knots sit at equal-count quantiles of the device readings, first and last
 * reading included; repeated quantiles collapse into one knot. The values at
 * the knots minimise the squared error of the interpolated correction.
 */
inline LookupTable build_lut(std::span<const Pair> p_pairs, int p_entries)
{
  if (p_entries < 2) {
    throw ValidationError("a lookup table needs at least 2 entries");
  }
  if (static_cast<std::size_t>(p_entries) > p_pairs.size()) {
    throw DomainError(fmt::format(
      "{} table entries need at least as many pairs, got {}", p_entries, p_pairs.size()));
  }
  std::vector<double> sorted;
  sorted.reserve(p_pairs.size());
  for (const auto& p : p_pairs) {
    sorted.push_back(p.dut_value);
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t last = sorted.size() - 1;

  LookupTable lut;
  for (int k = 0; k < p_entries; ++k) {
    const auto rank = static_cast<std::size_t>(
      (static_cast<std::uint64_t>(k) * last + static_cast<std::uint64_t>(p_entries - 1) / 2) /
      static_cast<std::uint64_t>(p_entries - 1));
    const double knot = sorted[rank];
    if (lut.breakpoints.empty() || knot > lut.breakpoints.back()) {
      lut.breakpoints.push_back(knot);
    }
  }
  if (lut.breakpoints.size() < 2) {
    throw DomainError("device readings take fewer than 2 distinct values");
  }

  const auto rows = static_cast<Eigen::Index>(p_pairs.size());
  const auto cols = static_cast<Eigen::Index>(lut.breakpoints.size());
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = p_pairs[static_cast<std::size_t>(i)];
    rhs(i) = p.ref_value;
    const auto it = std::upper_bound(lut.breakpoints.begin(), lut.breakpoints.end(), p.dut_value);
    const auto hi = static_cast<Eigen::Index>(it - lut.breakpoints.begin());
    if (hi == 0) {
      basis(i, 0) = 1.0;
    } else if (hi == cols) {
      basis(i, cols - 1) = 1.0;
    } else {
      const double x0 = lut.breakpoints[static_cast<std::size_t>(hi - 1)];
      const double x1 = lut.breakpoints[static_cast<std::size_t>(hi)];
      const double w = (p.dut_value - x0) / (x1 - x0);
      basis(i, hi - 1) = 1.0 - w;
      basis(i, hi) = w;
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < cols) {
    throw DomainError(fmt::format(
      "rank-deficient table fit: {} knots, rank {}", cols, qr.rank()));
  }
  const Eigen::VectorXd values = qr.solve(rhs);
  lut.corrections.assign(values.data(), values.data() + values.size());
  return lut;
}

struct ErrorReport
{
  double full_scale = 0.0;
  double pre_pct_fs = 0.0;
  double post_pct_fs = 0.0;
  double pre_max = 0.0;
  double post_max = 0.0;
  double pre_rms = 0.0;
  double post_rms = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_post = 0;
};

/// Deterministic 80/20 split: every fifth step is held out.
inline bool is_heldout(int p_step)
{
  return p_step % 5 == 4;
}

inline std::vector<Pair> training_pairs(std::span<const Pair> p_pairs, bool p_holdout)
{
  std::vector<Pair> out;
  for (const auto& p : p_pairs) {
    if (!p_holdout || !is_heldout(p.step)) {
      out.push_back(p);
    }
  }
  return out;
}

/**
 * @brief Mean absolute error in percent of full scale, before and after.
 *
 * "Before" covers every pair. "After" covers only held-out pairs when
 * `p_holdout` is set and any exist.
 */
inline ErrorReport evaluate(const CalibrationModel& p_model,
                            std::span<const Pair> p_pairs,
                            double p_full_scale,
                            bool p_holdout = true)
{
  if (p_pairs.empty()) {
    throw ValidationError("no pairs to evaluate");
  }
  if (!(p_full_scale > 0.0)) {
    throw ValidationError("full scale must be positive");
  }
  const bool any_heldout =
    std::any_of(p_pairs.begin(), p_pairs.end(), [](const Pair& p) { return is_heldout(p.step); });
  const bool split = p_holdout && any_heldout;

  ErrorReport report;
  report.full_scale = p_full_scale;
  report.n_pairs = p_pairs.size();
  double pre_sum = 0.0;
  double pre_sq = 0.0;
  double post_sum = 0.0;
  double post_sq = 0.0;
  for (const auto& p : p_pairs) {
    const double pre = std::abs(p.dut_value - p.ref_value);
    pre_sum += pre;
    pre_sq += pre * pre;
    report.pre_max = std::max(report.pre_max, pre);
    if (split && !is_heldout(p.step)) {
      continue;
    }
    const double post = std::abs(apply(p_model, p.dut_value) - p.ref_value);
    post_sum += post;
    post_sq += post * post;
    report.post_max = std::max(report.post_max, post);
    ++report.n_post;
  }
  const auto n = static_cast<double>(report.n_pairs);
  const auto m = static_cast<double>(report.n_post);
  report.pre_pct_fs = pre_sum / n / p_full_scale * 100.0;
  report.post_pct_fs = post_sum / m / p_full_scale * 100.0;
  report.pre_rms = std::sqrt(pre_sq / n);
  report.post_rms = std::sqrt(post_sq / m);
  return report;
}

inline double sum_squared_residual(const CalibrationModel& p_model, std::span<const Pair> p_pairs)
{
  double total = 0.0;
  for (const auto& p : p_pairs) {
    const double r = apply(p_model, p.dut_value) - p.ref_value;
    total += r * r;
  }
  return total;
}

struct Method
{
  enum class Kind
  {
    poly,
    lut,
    automatic,
  };
  Kind kind = Kind::automatic;
  int parameter = 0;

  [[nodiscard]] std::string text() const
  {
    switch (kind) {
      case Kind::poly:
        return fmt::format("poly:{}", parameter);
      case Kind::lut:
        return fmt::format("lut:{}", parameter);
      case Kind::automatic:
        break;
    }
    return "auto";
  }
};

inline Method parse_method(const std::string& p_text)
{
  if (p_text == "auto") {
    return {};
  }
  const auto colon = p_text.find(':');
  const std::string head = p_text.substr(0, colon);
  if (colon == std::string::npos || (head != "poly" && head != "lut")) {
    throw ValidationError("method must be poly:N, lut:N or auto, got '" + p_text + "'");
  }
  const auto value = parse_fixed(p_text.substr(colon + 1), 0);
  Method method;
  method.kind = head == "poly" ? Method::Kind::poly : Method::Kind::lut;
  method.parameter = static_cast<int>(value);
  if (method.kind == Method::Kind::poly && (value < 0 || value > max_poly_degree)) {
    throw ValidationError(fmt::format("poly degree must be in [0, {}]", max_poly_degree));
  }
  if (method.kind == Method::Kind::lut && (value < 2 || value > 1'000'000)) {
    throw ValidationError("lut size must be at least 2");
  }
  return method;
}

/**
 * @brief Polynomial when a fit of degree <= 3 comes within 5 % of the
 * 64-entry table's residual, otherwise the table.
 */
inline CalibrationModel select_model(std::span<const Pair> p_pairs)
{
  const int entries = static_cast<int>(std::min<std::size_t>(64, p_pairs.size()));
  const CalibrationModel table = build_lut(p_pairs, entries);
  const double table_residual = sum_squared_residual(table, p_pairs);
  std::optional<CalibrationModel> best;
  double best_residual = 0.0;
  for (int degree = 0; degree <= 3 && degree < static_cast<int>(p_pairs.size()); ++degree) {
    try {
      CalibrationModel poly = fit_polynomial(p_pairs, degree);
      const double residual = sum_squared_residual(poly, p_pairs);
      if (!best || residual < best_residual) {
        best = std::move(poly);
        best_residual = residual;
      }
    } catch (const DomainError&) {
      break;
    }
  }
  if (best && std::sqrt(best_residual) <= 1.05 * std::sqrt(table_residual)) {
    return *best;
  }
  return table;
}

inline CalibrationModel fit(const Method& p_method, std::span<const Pair> p_pairs)
{
  switch (p_method.kind) {
    case Method::Kind::poly:
      return fit_polynomial(p_pairs, p_method.parameter);
    case Method::Kind::lut:
      return build_lut(p_pairs, p_method.parameter);
    case Method::Kind::automatic:
      break;
  }
  return select_model(p_pairs);
}

// ---------------------------------------------------------------------------
// Files

/// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(std::string_view p_bytes)
{
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : p_bytes) {
    hash ^= static_cast<std::uint8_t>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::uint64_t fnv1a64_file(const std::string& p_path)
{
  std::ifstream in(p_path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open '" + p_path + "'");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

namespace detail {
inline std::string join_reals(std::span<const double> p_values)
{
  std::string out;
  for (const double v : p_values) {
    out += (out.empty() ? "" : ", ") + format_real(v);
  }
  return out;
}
}  // namespace detail

inline TextConfig model_to_text(const CalibrationModel& p_model)
{
  TextConfig doc;
  if (const auto* poly = std::get_if<Polynomial>(&p_model)) {
    doc.set("model.variant", "polynomial");
    doc.set("poly.degree", std::to_string(poly->degree()));
    doc.set("poly.center", format_real(poly->center));
    doc.set("poly.half_range", format_real(poly->half_range));
    doc.set("poly.coeffs", detail::join_reals(poly->coeffs));
    doc.set("poly.raw_coeffs", detail::join_reals(poly->raw_coefficients()));
  } else {
    const auto& lut = std::get<LookupTable>(p_model);
    doc.set("model.variant", "lut");
    doc.set("lut.entries", std::to_string(lut.breakpoints.size()));
    doc.set("lut.breakpoints", detail::join_reals(lut.breakpoints));
    doc.set("lut.corrections", detail::join_reals(lut.corrections));
  }
  return doc;
}

/// Reads the model keys; other keys (fit settings, provenance) are ignored.
inline CalibrationModel model_from_text(const TextConfig& p_doc)
{
  const auto& variant = p_doc.at("model.variant");
  if (variant == "polynomial") {
    Polynomial poly;
    poly.center = p_doc.real("poly.center");
    poly.half_range = p_doc.real("poly.half_range");
    poly.coeffs = detail::parse_real_list("poly.coeffs", p_doc.at("poly.coeffs"));
    if (poly.coeffs.empty() || poly.degree() > max_poly_degree || !(poly.half_range > 0.0)) {
      throw ValidationError("key 'poly.coeffs': need 1 to 9 coefficients and a positive range");
    }
    return poly;
  }
  if (variant == "lut") {
    LookupTable lut;
    lut.breakpoints = detail::parse_real_list("lut.breakpoints", p_doc.at("lut.breakpoints"));
    lut.corrections = detail::parse_real_list("lut.corrections", p_doc.at("lut.corrections"));
    if (lut.breakpoints.size() < 2 || lut.breakpoints.size() != lut.corrections.size()) {
      throw ValidationError("key 'lut.breakpoints': need at least 2, matching corrections");
    }
    for (std::size_t i = 1; i < lut.breakpoints.size(); ++i) {
      if (!(lut.breakpoints[i] > lut.breakpoints[i - 1])) {
        throw ValidationError("key 'lut.breakpoints': must strictly increase");
      }
    }
    return lut;
  }
  throw ValidationError("key 'model.variant': expected polynomial or lut, got '" + variant + "'");
}

inline TextConfig report_to_text(const ErrorReport& p_report, const std::string& p_unit)
{
  TextConfig doc;
  doc.set("report.unit", p_unit);
  doc.set("report.full_scale", format_real(p_report.full_scale));
  doc.set("report.n_pairs", std::to_string(p_report.n_pairs));
  doc.set("report.n_post", std::to_string(p_report.n_post));
  doc.set("report.pre_pct_fs", fmt::format("{:.6f}", p_report.pre_pct_fs));
  doc.set("report.post_pct_fs", fmt::format("{:.6f}", p_report.post_pct_fs));
  doc.set("report.pre_max", fmt::format("{:.6f}", p_report.pre_max));
  doc.set("report.post_max", fmt::format("{:.6f}", p_report.post_max));
  doc.set("report.pre_rms", fmt::format("{:.6f}", p_report.pre_rms));
  doc.set("report.post_rms", fmt::format("{:.6f}", p_report.post_rms));
  const double reduction =
    p_report.post_pct_fs > 0.0 ? p_report.pre_pct_fs / p_report.post_pct_fs : 0.0;
  doc.set("report.reduction", fmt::format("{:.3f}", reduction));
  return doc;
}

inline void write_residuals(std::ostream& p_out,
                            const CalibrationModel& p_model,
                            std::span<const Pair> p_pairs)
{
  p_out << "step,dut_value,ref_value,corrected,residual,heldout\n";
  for (const auto& p : p_pairs) {
    const double corrected = apply(p_model, p.dut_value);
    p_out << p.step << ',' << fmt::format("{:.6f}", p.dut_value) << ','
          << fmt::format("{:.6f}", p.ref_value) << ',' << fmt::format("{:.6f}", corrected)
          << ',' << fmt::format("{:.6f}", corrected - p.ref_value) << ','
          << (is_heldout(p.step) ? 1 : 0) << '\n';
  }
}

}  // namespace procal
