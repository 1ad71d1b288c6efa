#include "nlekit/embedviz/embedviz.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "nlekit/binio.hpp"
#include "nlekit/parallel.hpp"
#include "nlekit/rng.hpp"

namespace nlekit::embedviz {

DistanceMatrix pairwise_skld(const Matrix& dist, std::vector<PointInfo> points, unsigned workers) {
  const Eigen::Index n = dist.rows();
  if (n < 2) fail(ErrorKind::input, "pairwise_skld: need at least two distributions");
  if (!points.empty() && points.size() != static_cast<std::size_t>(n))
    fail(ErrorKind::input, "pairwise_skld: point metadata does not match the distributions");
  // Clamp once so each SKLD is the same arithmetic whichever way round.
  Matrix p(n, dist.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row(dist.row(i).begin(), dist.row(i).end());
    p.row(i) = divloss::clamp_simplex(row).transpose();
  }
  const Matrix logp = p.array().log().matrix();
  DistanceMatrix out{Matrix::Zero(n, n), std::move(points)};
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t ii) {
    const auto i = static_cast<Eigen::Index>(ii);
    for (Eigen::Index j = i + 1; j < n; ++j)
      out.d(i, j) = 0.5 * ((p.row(i) - p.row(j)).array() * (logp.row(i) - logp.row(j)).array()).sum();
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) out.d(i, j) = out.d(j, i);
  return out;
}

Affinities calibrate(const Matrix& d, double perplexity) {
  const Eigen::Index n = d.rows();
  if (!(perplexity > 1.0) || perplexity >= static_cast<double>(n))
    fail(ErrorKind::config, "t-SNE perplexity must lie in (1, n) with n = " + std::to_string(n));
  const double target = std::log(perplexity);  // entropy in nats
  Affinities a{Matrix::Zero(n, n), std::vector<double>(static_cast<std::size_t>(n)),
               std::vector<double>(static_cast<std::size_t>(n))};
  Vector row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));
    // H(beta) is decreasing in beta; bisect on log(beta). Shifting by the
    // nearest distance keeps exp() in range.
    auto entropy = [&](double beta) {
      double z = 0, s = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (d(i, j) - dmin));
        z += row(j);
        s += row(j) * (d(i, j) - dmin);
      }
      row /= z;
      return std::log(z) + beta * s / z;
    };
    double lo = -50, hi = 50, h = 0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      h = entropy(std::exp(mid));
      if (std::abs(h - target) < 1e-12) break;
      (h > target ? lo : hi) = mid;
    }
    const double beta = std::exp(0.5 * (lo + hi));
    h = entropy(beta);
    a.conditional.row(i) = row.transpose();
    a.beta[static_cast<std::size_t>(i)] = beta;
    a.perplexity[static_cast<std::size_t>(i)] = std::exp(h);
  }
  return a;
}

namespace {

double kl_objective(const Matrix& p, const Matrix& y) {
  const Eigen::Index n = y.rows();
  Matrix num(n, n);
  double z = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += num(i, j);
    }
  double kl = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && p(i, j) > 0) kl += p(i, j) * std::log(p(i, j) / std::max(num(i, j) / z, 1e-300));
  return kl;
}

}  // namespace

Embedding2D tsne_embed(const DistanceMatrix& dm, const TsneOptions& o) {
  const Eigen::Index n = dm.d.rows();
  if (n < 2) fail(ErrorKind::input, "t-SNE needs at least two points");
  if (o.iters == 0 || o.log_every == 0) fail(ErrorKind::config, "t-SNE iterations and logging interval must be > 0");
  const Affinities a = calibrate(dm.d, o.perplexity);
  Matrix p = (a.conditional + a.conditional.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  Rng rng(derive_seed(o.seed, 0x75e));
  Matrix y(n, 2), vel = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2), grad(n, 2), num(n, n);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();

  Embedding2D e;
  e.points = dm.points;
  for (std::size_t it = 0; it < o.iters; ++it) {
    const double exag = it < o.exaggeration_iters ? o.exaggeration : 1.0;
    const double mom = it < o.momentum_switch ? o.momentum : o.final_momentum;
    double z = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        num(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        z += num(i, j);
      }
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVector2d g = Eigen::RowVector2d::Zero();
      for (Eigen::Index j = 0; j < n; ++j) g += (exag * p(i, j) - num(i, j) / z) * num(i, j) * (y.row(i) - y.row(j));
      grad.row(i) = 4.0 * g;
    }
    // Delta-bar-delta gains.
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      double& gk = gains.data()[k];
      gk = (grad.data()[k] > 0) != (vel.data()[k] > 0) ? gk + 0.2 : std::max(gk * 0.8, 0.01);
      vel.data()[k] = mom * vel.data()[k] - o.learning_rate * gk * grad.data()[k];
    }
    y += vel;
    y.rowwise() -= y.colwise().mean();
    const std::size_t done = it + 1;
    if (done % o.log_every == 0 || done == o.iters) e.history.emplace_back(done, kl_objective(p, y));
  }
  if (!y.allFinite()) fail(ErrorKind::numeric, "t-SNE produced non-finite coordinates");
  e.coords = y;
  e.iterations = o.iters;
  e.objective = e.history.back().second;
  return e;
}

Embedding2D pca_project(const Matrix& v, std::size_t dims, std::vector<PointInfo> points) {
  const Eigen::Index n = v.rows(), k = v.cols(), d = static_cast<Eigen::Index>(dims);
  if (dims < 1 || dims > static_cast<std::size_t>(k)) fail(ErrorKind::config, "PCA: dims must lie in [1, K]");
  if (n < d + 1) fail(ErrorKind::input, "PCA: need at least dims + 1 vectors");
  Embedding2D e;
  e.points = std::move(points);
  const Matrix c = v.rowwise() - v.colwise().mean();
  e.iterations = 0;
  if (c.cwiseAbs().maxCoeff() == 0.0) {
    e.coords = Matrix::Zero(n, d);
    e.components = Matrix::Zero(k, d);
    e.variances = Vector::Zero(d);
    e.degenerate = true;
    return e;
  }
  const Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // Eigen sorts ascending.
  e.components.resize(k, d);
  e.variances.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::VectorXd u = es.eigenvectors().col(k - 1 - j);
    Eigen::Index arg;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0) u = -u;
    e.components.col(j) = u;
    e.variances(j) = std::max(es.eigenvalues()(k - 1 - j), 0.0);
  }
  e.coords = c * e.components;
  return e;
}

double silhouette(const Matrix& x, const std::vector<std::string>& labels) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != labels.size() || n < 2) fail(ErrorKind::input, "silhouette: labels do not match points");
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) groups[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (groups.size() < 2) fail(ErrorKind::input, "silhouette: need at least two clusters");
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& own = groups[labels[static_cast<std::size_t>(i)]];
    if (own.size() == 1) continue;
    double a = 0, b = std::numeric_limits<double>::infinity();
    for (auto j : own) a += (x.row(i) - x.row(j)).norm();
    a /= static_cast<double>(own.size() - 1);
    for (const auto& [name, members] : groups) {
      if (name == labels[static_cast<std::size_t>(i)]) continue;
      double s = 0;
      for (auto j : members) s += (x.row(i) - x.row(j)).norm();
      b = std::min(b, s / static_cast<double>(members.size()));
    }
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
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

void save_text(const std::string& path, const std::string& s) { binio::write_file(path, binio::Bytes(s.begin(), s.end())); }

std::string load_text(const std::string& path) {
  const auto b = binio::read_file(path);
  return std::string(b.begin(), b.end());
}

}  // namespace

void emit_scatter(const Embedding2D& e, const std::string& csv_path, const std::string& svg_path,
                  const std::string& title) {
  const Eigen::Index n = e.coords.rows();
  if (e.coords.cols() < 2) fail(ErrorKind::input, "emit_scatter: need 2D coordinates");
  auto info = [&](Eigen::Index i) {
    return i < static_cast<Eigen::Index>(e.points.size()) ? e.points[static_cast<std::size_t>(i)]
                                                          : PointInfo{std::to_string(i), "", ""};
  };
  std::ostringstream csv;
  csv << "id,x,y,scene,super_cluster\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto p = info(i);
    csv << p.id << "," << num(e.coords(i, 0)) << "," << num(e.coords(i, 1)) << "," << p.scene << "," << p.super_cluster
        << "\n";
  }
  save_text(csv_path, csv.str());

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::vector<std::string> clusters;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::find(clusters.begin(), clusters.end(), info(i).super_cluster) == clusters.end())
      clusters.push_back(info(i).super_cluster);
  const double w = 640, h = 480, margin = 40, legend = 150;
  double x0 = e.coords.col(0).minCoeff(), x1 = e.coords.col(0).maxCoeff();
  double y0 = e.coords.col(1).minCoeff(), y1 = e.coords.col(1).maxCoeff();
  if (x1 - x0 < 1e-12) x0 -= 1, x1 += 1;
  if (y1 - y0 < 1e-12) y0 -= 1, y1 += 1;
  auto sx = [&](double x) { return margin + (x - x0) / (x1 - x0) * (w - legend - 2 * margin); };
  auto sy = [&](double y) { return h - margin - (y - y0) / (y1 - y0) * (h - 2 * margin); };
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << " " << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) svg << "<text x=\"" << margin << "\" y=\"24\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto p = info(i);
    const auto c = static_cast<std::size_t>(std::find(clusters.begin(), clusters.end(), p.super_cluster) - clusters.begin());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f\" cy=\"%.2f", sx(e.coords(i, 0)), sy(e.coords(i, 1)));
    svg << "<circle cx=\"" << buf << "\" r=\"4\" fill=\"" << palette[c % 8] << "\"><title>" << xml_escape(p.id + " " + p.scene)
        << "</title></circle>\n";
  }
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const double ly = margin + 20.0 * static_cast<double>(c), lx = w - legend + 10;
    svg << "<circle cx=\"" << lx << "\" cy=\"" << ly << "\" r=\"5\" fill=\"" << palette[c % 8] << "\"/>"
        << "<text x=\"" << lx + 12 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
        << xml_escape(clusters[c].empty() ? "(none)" : clusters[c]) << "</text>\n";
  }
  svg << "</svg>\n";
  save_text(svg_path, svg.str());
}

Embedding2D read_scatter_csv(const std::string& path) {
  std::istringstream in(load_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "id,x,y,scene,super_cluster")
    fail(ErrorKind::data, "'" + path + "': not a scatter CSV");
  std::vector<std::array<double, 2>> xy;
  Embedding2D e;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string s; std::getline(ls, s, ',');) f.push_back(s);
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5) fail(ErrorKind::data, "'" + path + "': malformed row '" + line + "'");
    try {
      xy.push_back({std::stod(f[1]), std::stod(f[2])});
    } catch (const std::exception&) {
      fail(ErrorKind::data, "'" + path + "': malformed number in '" + line + "'");
    }
    e.points.push_back({f[0], f[3], f[4]});
  }
  e.coords.resize(static_cast<Eigen::Index>(xy.size()), 2);
  for (std::size_t i = 0; i < xy.size(); ++i) {
    e.coords(static_cast<Eigen::Index>(i), 0) = xy[i][0];
    e.coords(static_cast<Eigen::Index>(i), 1) = xy[i][1];
  }
  return e;
}

Matrix read_nle_text(const std::string& path, std::vector<std::string>* names) {
  std::istringstream in(load_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("class", 0) != 0) fail(ErrorKind::data, "'" + path + "': not an NLE export");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    std::getline(ls, name, '\t');
    if (names) names->push_back(name);
    std::vector<double> r;
    for (std::string s; std::getline(ls, s, '\t');) {
      try {
        r.push_back(std::stod(s));
      } catch (const std::exception&) {
        fail(ErrorKind::data, "'" + path + "': malformed number '" + s + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorKind::data, "'" + path + "': no rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) fail(ErrorKind::data, "'" + path + "': ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

}  // namespace nlekit::embedviz
