#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlekit/divloss/divloss.hpp"

/// SKLD-based t-SNE, PCA and scatter output.
namespace nlekit::embedviz {

using divloss::Matrix;
using divloss::Vector;

struct PointInfo {
  std::string id;
  std::string scene;
  std::string super_cluster;
};

struct DistanceMatrix {
  Matrix d;  // n x n, symmetric, zero diagonal
  std::vector<PointInfo> points;
};

/// D(i, j) = SKLD(row i, row j). Input error for fewer than two rows.
DistanceMatrix pairwise_skld(const Matrix& distributions, std::vector<PointInfo> points = {}, unsigned workers = 1);

struct Affinities {
  Matrix conditional;               // p_{j|i}, rows sum to 1
  std::vector<double> beta;         // 1 / (2 sigma_i^2)
  std::vector<double> perplexity;   // achieved 2^H(p_{.|i}), H in bits
};

/// p_{j|i} proportional to exp(-beta_i D(i, j)), beta_i found by bisection in
/// log space so 2^H matches `perplexity`. Configuration error when
/// perplexity >= n or <= 1.
Affinities calibrate(const Matrix& d, double perplexity);

struct TsneOptions {
  double perplexity = 30.0;
  std::size_t iters = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::size_t log_every = 50;
};

struct Embedding2D {
  Matrix coords;  // n x 2
  std::vector<PointInfo> points;
  double objective = 0.0;  // KL(P || Q) with the unexaggerated P
  std::size_t iterations = 0;
  std::vector<std::pair<std::size_t, double>> history;  // (iteration, KL)
  bool degenerate = false;
  Matrix components;     // PCA only: K x dims, orthonormal columns
  Vector variances;      // PCA only: eigenvalues, descending
};

Embedding2D tsne_embed(const DistanceMatrix& distances, const TsneOptions& opts = {});

/// Mean-centered projection onto the top `dims` covariance eigenvectors;
/// each component's largest-magnitude loading is made positive. All
/// identical inputs give zero coordinates and `degenerate`.
Embedding2D pca_project(const Matrix& vectors, std::size_t dims = 2, std::vector<PointInfo> points = {});

/// Mean silhouette coefficient of 2D (or any-dim) points under `labels`,
/// Euclidean distance; singleton clusters score 0.
double silhouette(const Matrix& coords, const std::vector<std::string>& labels);

/// CSV "id,x,y,scene,super_cluster" and an SVG scatter, one colour per
/// super-cluster, with a legend. I/O errors name the path.
void emit_scatter(const Embedding2D& e, const std::string& csv_path, const std::string& svg_path,
                  const std::string& title = "");
Embedding2D read_scatter_csv(const std::string& path);

/// Reads the tab-separated NLE export: returns K x K with row c = NLE_c and
/// the class names.
Matrix read_nle_text(const std::string& path, std::vector<std::string>* names = nullptr);

}  // namespace nlekit::embedviz
