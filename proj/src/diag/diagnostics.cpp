#include "optrot/diag/diagnostics.hpp"

#include "optrot/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace optrot {

namespace {

constexpr double kDegeneracyGap = 1e-8;

void require_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("weight shapes differ: " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

void require_input_dim(const Matrix& w, const SymmetricPsd& h) {
  if (static_cast<std::size_t>(w.cols()) != h.dim()) {
    throw InvalidArgument("weight input dimension " + std::to_string(w.cols()) +
                          " does not match Hessian dimension " + std::to_string(h.dim()));
  }
}

double quadratic_trace(const Matrix& a, const Matrix& h) {
  return (a * h).cwiseProduct(a).sum();
}

}  // namespace

double weight_incoherence(const Matrix& w) {
  require_finite(w, "weight_incoherence input");
  const double frob = w.norm();
  if (frob == 0.0) throw InvalidArgument("weight incoherence of an all-zero matrix");
  const double mn = static_cast<double>(w.rows()) * static_cast<double>(w.cols());
  return std::max(1.0, std::sqrt(mn) * max_abs(w) / frob);
}

HessianIncoherence hessian_incoherence(const EigenDecomposition& eig, double trace) {
  HessianIncoherence out;
  const double n = static_cast<double>(eig.q.rows());
  out.mu = std::max(1.0, std::sqrt(n) * max_abs(eig.q));
  const double gap = kDegeneracyGap * std::abs(trace);
  for (Eigen::Index i = 1; i < eig.lambdas.size(); ++i) {
    if (std::abs(eig.lambdas(i - 1) - eig.lambdas(i)) < gap) out.degenerate = true;
  }
  if (eig.lambdas.size() > 1 && trace == 0.0) out.degenerate = true;
  return out;
}

HessianIncoherence hessian_incoherence(const SymmetricPsd& h) {
  return hessian_incoherence(jacobi_eigh(h), h.trace());
}

double layerwise_error(const Matrix& w, const Matrix& w_hat, const SymmetricPsd& h) {
  require_same_shape(w, w_hat);
  require_input_dim(w, h);
  return std::max(0.0, quadratic_trace(w_hat - w, h.matrix()));
}

double ub_bound(const SymmetricPsd& h) {
  const double tr = h.trace();
  if (!(tr > 0.0)) throw InvalidArgument("UB needs a Hessian with positive trace");
  return tr - off_diagonal_sq(h.matrix()) / (2.0 * tr);
}

double trace_sqrt(const EigenDecomposition& eig) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.lambdas.size(); ++i) {
    total += std::sqrt(std::max(0.0, eig.lambdas(i)));
  }
  return total;
}

double rtn_error_bound(const Matrix& w, double lambda_max, int bits) {
  if (bits < 2 || bits > 8) throw InvalidArgument("bits must be in [2, 8]");
  const double mu = weight_incoherence(w);
  const double levels = static_cast<double>((1 << bits) - 1);
  return mu * mu / (levels * levels) * lambda_max * w.squaredNorm();
}

double rtn_error_bound(const Matrix& w, const SymmetricPsd& h, int bits) {
  require_input_dim(w, h);
  const EigenDecomposition eig = jacobi_eigh(h);
  return rtn_error_bound(w, eig.lambdas.size() > 0 ? eig.lambdas(0) : 0.0, bits);
}

GptqBounds gptq_error_bounds(const Matrix& w, const SymmetricPsd& h, const ConstrainedLdl& l,
                             const EigenDecomposition& eig, int bits, double delta) {
  require_input_dim(w, h);
  if (bits < 3 || bits > 8) throw InvalidArgument("GPTQ bounds need bits in [3, 8]");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (l.l.rows() != w.cols()) throw InvalidArgument("LDL factor dimension mismatch");
  const double m = static_cast<double>(w.rows());
  const double n = static_cast<double>(w.cols());
  const double mu_w = weight_incoherence(w);
  const double frob_sq = w.squaredNorm();
  const double shrunk = static_cast<double>((1 << bits) - 3);
  const double common = mu_w * mu_w / (n * shrunk * shrunk) * frob_sq;
  const double half_log = 0.5 * std::log(2.0 * m * n / delta);

  GptqBounds out;
  out.trace_bound = common * ldl_objective(h.matrix(), l.l) * half_log;
  out.ub_bound = common * 2.0 * ub_bound(h) * half_log;
  const double mu_h = hessian_incoherence(eig, h.trace()).mu;
  const double ts = trace_sqrt(eig);
  const double log4 = std::log(4.0 * m * n / delta);
  out.incoherence_bound = common * mu_h * mu_h * ts * ts / n * log4 * log4;
  return out;
}

GptqBounds gptq_error_bounds(const Matrix& w, const SymmetricPsd& h, const ConstrainedLdl& l,
                             int bits, double delta) {
  return gptq_error_bounds(w, h, l, jacobi_eigh(h), bits, delta);
}

double correction_max(const ConstrainedLdl& l) { return l.l.colwise().squaredNorm().maxCoeff(); }

double correction_max(const LdlFactors& f) { return f.l().colwise().squaredNorm().maxCoeff(); }

std::string Snr::to_string() const { return exact ? "exact" : format_double(db); }

Snr snr_db(const Matrix& w, const Matrix& w_hat, const SymmetricPsd& h) {
  require_same_shape(w, w_hat);
  require_input_dim(w, h);
  const double signal = quadratic_trace(w, h.matrix());
  if (!(signal > 0.0)) throw InvalidArgument("SNR undefined for zero signal tr(W H W^T)");
  const double err = layerwise_error(w, w_hat, h);
  Snr out;
  if (err == 0.0) {
    out.exact = true;
    return out;
  }
  out.db = 10.0 * std::log10(signal / err);
  return out;
}

double kl_proxy(const std::vector<LayerError>& layers) {
  double total = 0.0;
  for (const LayerError& layer : layers) total += layerwise_error(*layer.w, *layer.w_hat, *layer.h);
  return total;
}

BoundReport make_bound_report(const std::string& layer, const Matrix& w, const Matrix& w_hat,
                              const SymmetricPsd& h, int bits, double delta) {
  require_same_shape(w, w_hat);
  require_input_dim(w, h);
  const EigenDecomposition eig = jacobi_eigh(h);
  BoundReport r;
  r.layer = layer;
  r.mu_w = weight_incoherence(w);
  const HessianIncoherence inc = hessian_incoherence(eig, h.trace());
  r.mu_h = inc.mu;
  r.mu_h_degenerate = inc.degenerate;
  r.w_max = max_abs(w);
  r.frob_sq = w.squaredNorm();
  r.tr_h = h.trace();
  r.tr_d = ldl_upper(h).trace_d();
  r.ub = ub_bound(h);
  r.off_diag_sq = off_diagonal_sq(h.matrix());
  r.rtn_bound = rtn_error_bound(w, eig.lambdas(0), bits);
  if (bits >= 3) {
    const double c = 2.0 / std::log(4.0 * static_cast<double>(w.rows()) *
                                     static_cast<double>(w.cols()) / delta);
    const GptqBounds g = gptq_error_bounds(w, h, constrained_ldl(h, c), eig, bits, delta);
    r.gptq_trace_bound = g.trace_bound;
    r.gptq_ub_bound = g.ub_bound;
    r.gptq_incoherence_bound = g.incoherence_bound;
  } else {
    r.gptq_trace_bound = r.gptq_ub_bound = r.gptq_incoherence_bound =
        std::numeric_limits<double>::quiet_NaN();
  }
  r.actual_error = layerwise_error(w, w_hat, h);
  r.snr = snr_db(w, w_hat, h);
  return r;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const std::vector<std::string>& bound_report_columns() {
  static const std::vector<std::string> columns = {
      "layer",  "mu_w",          "mu_h",       "mu_h_degenerate",  "w_max",
      "frob_sq", "tr_h",         "tr_d",       "ub",               "off_diag_sq",
      "rtn_bound", "gptq_trace_bound", "gptq_ub_bound", "gptq_incoherence_bound",
      "actual_error", "snr_db"};
  return columns;
}

std::string bound_reports_csv(const std::vector<BoundReport>& reports) {
  std::ostringstream out;
  const auto& cols = bound_report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const BoundReport& r : reports) {
    out << r.layer << ',' << format_double(r.mu_w) << ',' << format_double(r.mu_h) << ','
        << (r.mu_h_degenerate ? 1 : 0) << ',' << format_double(r.w_max) << ','
        << format_double(r.frob_sq) << ',' << format_double(r.tr_h) << ','
        << format_double(r.tr_d) << ',' << format_double(r.ub) << ','
        << format_double(r.off_diag_sq) << ',' << format_double(r.rtn_bound) << ','
        << format_double(r.gptq_trace_bound) << ',' << format_double(r.gptq_ub_bound) << ','
        << format_double(r.gptq_incoherence_bound) << ',' << format_double(r.actual_error)
        << ',' << r.snr.to_string() << '\n';
  }
  return out.str();
}

std::string bound_reports_json(const std::vector<BoundReport>& reports) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const BoundReport& r : reports) {
    rows.push_back({{"layer", r.layer},
                    {"mu_w", number(r.mu_w)},
                    {"mu_h", number(r.mu_h)},
                    {"mu_h_degenerate", r.mu_h_degenerate},
                    {"w_max", number(r.w_max)},
                    {"frob_sq", number(r.frob_sq)},
                    {"tr_h", number(r.tr_h)},
                    {"tr_d", number(r.tr_d)},
                    {"ub", number(r.ub)},
                    {"off_diag_sq", number(r.off_diag_sq)},
                    {"rtn_bound", number(r.rtn_bound)},
                    {"gptq_trace_bound", number(r.gptq_trace_bound)},
                    {"gptq_ub_bound", number(r.gptq_ub_bound)},
                    {"gptq_incoherence_bound", number(r.gptq_incoherence_bound)},
                    {"actual_error", number(r.actual_error)},
                    {"snr_db", r.snr.exact ? nlohmann::json("exact") : number(r.snr.db)}});
  }
  return rows.dump(2) + "\n";
}

}  // namespace optrot
