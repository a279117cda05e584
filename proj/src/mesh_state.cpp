#include "pcm/mesh_state.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csv_util.hpp"
#include "pcm/errors.hpp"

namespace pcm {

HistorySegment::HistorySegment(double h, Eigen::MatrixXd values,
                               std::optional<Eigen::MatrixXd> derivs)
    : h_(h), values_(std::move(values)), derivs_(std::move(derivs)) {
  if (!(h_ > 0.0) || !std::isfinite(h_)) throw DomainError("history horizon must be positive");
  if (values_.rows() < 3) throw DomainError("history segment needs m >= 2");
  if (values_.cols() < 1) throw DomainError("history segment needs n >= 1");
  if (!values_.allFinite()) throw DomainError("history segment values must be finite");
  if (derivs_) {
    if (derivs_->rows() != values_.rows() || derivs_->cols() != values_.cols())
      throw DomainError("derivative data shape mismatch");
    if (!derivs_->allFinite()) throw DomainError("history segment derivatives must be finite");
  }
}

HistorySegment HistorySegment::zero(double h, int n, int m, bool with_derivs) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m + 1, n);
  if (with_derivs) return HistorySegment(h, v, Eigen::MatrixXd::Zero(m + 1, n));
  return HistorySegment(h, std::move(v));
}

HistorySegment HistorySegment::constant(double h, int m, const Eigen::VectorXd& c) {
  Eigen::MatrixXd v = c.transpose().replicate(m + 1, 1);
  return HistorySegment(h, std::move(v), Eigen::MatrixXd::Zero(m + 1, c.size()));
}

HistorySegment HistorySegment::sample(double h, int n, int m,
                                      const std::function<Eigen::VectorXd(double)>& f,
                                      const std::function<Eigen::VectorXd(double)>& df) {
  Eigen::MatrixXd v(m + 1, n);
  Eigen::MatrixXd d(m + 1, n);
  for (int i = 0; i <= m; ++i) {
    const double theta = (i == m) ? 0.0 : -h + i * (h / m);
    v.row(i) = f(theta).transpose();
    if (df) d.row(i) = df(theta).transpose();
  }
  if (df) return HistorySegment(h, std::move(v), std::move(d));
  return HistorySegment(h, std::move(v));
}

Eigen::VectorXd HistorySegment::eval(double theta) const {
  const double tol = 1e-10 * h_;
  if (theta < -h_ - tol || theta > tol || !std::isfinite(theta))
    throw DomainError("history evaluation outside [-h,0]: theta = " + detail::format_double(theta));
  const int m = intervals();
  const double dx = spacing();
  const double x = std::clamp((theta + h_) / dx, 0.0, static_cast<double>(m));
  const int i = std::min(static_cast<int>(x), m - 1);
  const double s = x - i;
  // Snap to nodes so the interpolant is exact there.
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9) return values_.row(static_cast<int>(r)).transpose();
  if (!derivs_) return ((1.0 - s) * values_.row(i) + s * values_.row(i + 1)).transpose();
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return (h00 * values_.row(i) + h10 * dx * derivs_->row(i) + h01 * values_.row(i + 1) +
          h11 * dx * derivs_->row(i + 1))
      .transpose();
}

Eigen::VectorXd HistorySegment::eval_derivative(double theta) const {
  const double tol = 1e-10 * h_;
  if (theta < -h_ - tol || theta > tol || !std::isfinite(theta))
    throw DomainError("history evaluation outside [-h,0]: theta = " + detail::format_double(theta));
  const int m = intervals();
  const double dx = spacing();
  const double x = std::clamp((theta + h_) / dx, 0.0, static_cast<double>(m));
  const int i = std::min(static_cast<int>(x), m - 1);
  const double s = x - i;
  if (!derivs_) return ((values_.row(i + 1) - values_.row(i)) / dx).transpose();
  const double s2 = s * s;
  const double d00 = (6 * s2 - 6 * s) / dx;
  const double d10 = 3 * s2 - 4 * s + 1;
  const double d01 = -d00;
  const double d11 = 3 * s2 - 2 * s;
  return (d00 * values_.row(i) + d10 * derivs_->row(i) + d01 * values_.row(i + 1) +
          d11 * derivs_->row(i + 1))
      .transpose();
}

void HistorySegment::check_compatible(const HistorySegment& other) const {
  if (other.values_.rows() != values_.rows() || other.values_.cols() != values_.cols() ||
      std::abs(other.h_ - h_) > 1e-12 * h_)
    throw DomainError("incompatible history segments");
}

HistorySegment& HistorySegment::axpy(double a, const HistorySegment& other) {
  check_compatible(other);
  values_ += a * other.values_;
  if (derivs_ && other.derivs_)
    *derivs_ += a * *other.derivs_;
  else
    derivs_.reset();
  return *this;
}

HistorySegment& HistorySegment::operator+=(const HistorySegment& other) { return axpy(1.0, other); }
HistorySegment& HistorySegment::operator-=(const HistorySegment& other) { return axpy(-1.0, other); }

HistorySegment& HistorySegment::operator*=(double a) {
  values_ *= a;
  if (derivs_) *derivs_ *= a;
  return *this;
}

HistorySegment operator+(HistorySegment a, const HistorySegment& b) { return a += b; }
HistorySegment operator-(HistorySegment a, const HistorySegment& b) { return a -= b; }
HistorySegment operator*(double a, HistorySegment b) { return b *= a; }

Eigen::VectorXd to_mesh(const HistorySegment& seg) {
  // values is (m+1)×n column-major; node-major flattening is the row-major order.
  Eigen::MatrixXd vt = seg.values().transpose();
  return Eigen::Map<const Eigen::VectorXd>(vt.data(), vt.size());
}

namespace {

Eigen::MatrixXd unflatten(const Eigen::Ref<const Eigen::VectorXd>& coords, int n, int m) {
  if (coords.size() != static_cast<Eigen::Index>(n) * (m + 1))
    throw DomainError("mesh coordinate length does not match n(m+1)");
  Eigen::MatrixXd vt(n, m + 1);
  Eigen::Map<Eigen::VectorXd>(vt.data(), vt.size()) = coords;
  return vt.transpose();
}

}  // namespace

HistorySegment from_mesh(const Eigen::Ref<const Eigen::VectorXd>& coords, double h, int n, int m) {
  return HistorySegment(h, unflatten(coords, n, m));
}

HistorySegment from_mesh(const Eigen::Ref<const Eigen::VectorXd>& coords,
                         const Eigen::Ref<const Eigen::VectorXd>& deriv_coords, double h, int n,
                         int m) {
  return HistorySegment(h, unflatten(coords, n, m), unflatten(deriv_coords, n, m));
}

std::vector<HistorySegment> hat_basis(int n, int m, double h) {
  if (n < 1 || m < 2) throw DomainError("hat_basis needs n >= 1 and m >= 2");
  std::vector<HistorySegment> basis;
  basis.reserve(static_cast<std::size_t>(n) * (m + 1));
  for (int i = 0; i <= m; ++i) {
    for (int c = 0; c < n; ++c) {
      Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m + 1, n);
      v(i, c) = 1.0;
      basis.emplace_back(h, std::move(v));
    }
  }
  return basis;
}

Eigen::MatrixXd fd_derivative(const Eigen::MatrixXd& f, double dx) {
  const Eigen::Index N = f.rows();
  Eigen::MatrixXd d(N, f.cols());
  if (N < 3) throw DomainError("finite differences need at least three samples");
  if (N < 5) {
    d.row(0) = (-3 * f.row(0) + 4 * f.row(1) - f.row(2)) / (2 * dx);
    for (Eigen::Index i = 1; i + 1 < N; ++i) d.row(i) = (f.row(i + 1) - f.row(i - 1)) / (2 * dx);
    d.row(N - 1) = (3 * f.row(N - 1) - 4 * f.row(N - 2) + f.row(N - 3)) / (2 * dx);
    return d;
  }
  const double c = 12 * dx;
  d.row(0) = (-25 * f.row(0) + 48 * f.row(1) - 36 * f.row(2) + 16 * f.row(3) - 3 * f.row(4)) / c;
  d.row(1) = (-3 * f.row(0) - 10 * f.row(1) + 18 * f.row(2) - 6 * f.row(3) + f.row(4)) / c;
  for (Eigen::Index i = 2; i + 2 < N; ++i)
    d.row(i) = (-f.row(i + 2) + 8 * f.row(i + 1) - 8 * f.row(i - 1) + f.row(i - 2)) / c;
  const Eigen::Index e = N - 1;
  d.row(e - 1) =
      (3 * f.row(e) + 10 * f.row(e - 1) - 18 * f.row(e - 2) + 6 * f.row(e - 3) - f.row(e - 4)) / c;
  d.row(e) =
      (25 * f.row(e) - 48 * f.row(e - 1) + 36 * f.row(e - 2) - 16 * f.row(e - 3) + 3 * f.row(e - 4)) /
      c;
  return d;
}

HistorySegment with_fd_derivs(const HistorySegment& seg) {
  if (seg.has_derivs()) return seg;
  return HistorySegment(seg.horizon(), seg.values(), fd_derivative(seg.values(), seg.spacing()));
}

int TimeGrid::steps() const { return static_cast<int>(std::llround((end - start) / step)); }

TimeGrid make_time_grid(double start, double end, double step) {
  if (!(step > 0.0)) throw DomainError("time step must be positive");
  if (end < start) throw DomainError("time grid end precedes start");
  const double ratio = (end - start) / step;
  const double k = std::round(ratio);
  if (std::abs(ratio - k) > 1e-12 * std::max(1.0, ratio))
    throw DomainError("time step does not divide the interval");
  TimeGrid g{start, end, step};
  if (k > 0) g.step = (end - start) / k;
  return g;
}

int WeightedTrajectory::index_of(double t) const {
  const int k = static_cast<int>(std::llround((t - grid.start) / grid.step));
  if (k < 0 || k >= size()) throw DomainError("time outside trajectory window");
  return k;
}

double weighted_sup_norm(const WeightedTrajectory& traj, double eta, double s) {
  double best = 0.0;
  for (int k = 0; k < traj.size(); ++k) {
    const double w = std::exp(-eta * std::abs(traj.time(k) - s));
    best = std::max(best, w * traj.segments[k].sup_norm());
  }
  return best;
}

std::string history_to_csv(const HistorySegment& seg) {
  std::ostringstream out;
  const int n = seg.dim();
  out << "theta";
  for (int c = 0; c < n; ++c) out << ",x" << c;
  if (seg.has_derivs())
    for (int c = 0; c < n; ++c) out << ",dx" << c;
  out << '\n';
  for (int i = 0; i <= seg.intervals(); ++i) {
    out << detail::format_double(i == seg.intervals() ? 0.0 : seg.node(i));
    for (int c = 0; c < n; ++c) out << ',' << detail::format_double(seg.values()(i, c));
    if (seg.has_derivs())
      for (int c = 0; c < n; ++c) out << ',' << detail::format_double(seg.derivs()(i, c));
    out << '\n';
  }
  return out.str();
}

HistorySegment history_from_csv(std::string_view text) {
  auto rows = detail::lines(text);
  if (rows.size() < 4) throw DomainError("history CSV needs a header and at least three nodes");
  auto header = detail::split(rows[0], ',');
  if (header.empty() || detail::trim(header[0]) != "theta")
    throw DomainError("history CSV header must start with 'theta'");
  int n = 0;
  int nd = 0;
  for (std::size_t j = 1; j < header.size(); ++j) {
    auto name = detail::trim(header[j]);
    if (name.rfind("dx", 0) == 0)
      ++nd;
    else if (name.rfind('x', 0) == 0)
      ++n;
    else
      throw DomainError("unexpected history CSV column '" + std::string(name) + "'");
  }
  if (n == 0 || (nd != 0 && nd != n)) throw DomainError("malformed history CSV header");
  const int m = static_cast<int>(rows.size()) - 2;
  Eigen::MatrixXd v(m + 1, n);
  Eigen::MatrixXd d(m + 1, n);
  std::vector<double> theta(m + 1);
  for (int i = 0; i <= m; ++i) {
    auto cells = detail::split(rows[i + 1], ',');
    if (static_cast<int>(cells.size()) != 1 + n + nd)
      throw DomainError("history CSV row " + std::to_string(i + 2) + " has wrong width");
    theta[i] = detail::parse_double(cells[0]);
    for (int c = 0; c < n; ++c) v(i, c) = detail::parse_double(cells[1 + c]);
    for (int c = 0; c < nd; ++c) d(i, c) = detail::parse_double(cells[1 + n + c]);
  }
  const double h = -theta[0];
  for (int i = 0; i <= m; ++i) {
    if (std::abs(theta[i] - (-h + i * h / m)) > 1e-9 * h)
      throw DomainError("history CSV nodes are not uniform on [-h,0]");
  }
  if (nd) return HistorySegment(h, std::move(v), std::move(d));
  return HistorySegment(h, std::move(v));
}

}  // namespace pcm
