#include "loopcycle/gff.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>

#include "loopcycle/errors.hpp"
#include "loopcycle/rng.hpp"
#include "loopcycle/union_find.hpp"

namespace loopcycle {

struct GffSampler::Impl {
  BoxConfig box;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

GffSampler::GffSampler(const BoxConfig& box) : impl_(std::make_unique<Impl>()) {
  impl_->box = box;
  Lattice lat(box);
  const auto n = lat.volume();
  if (n > 20'000'000) throw ResourceError("box too large for sparse Cholesky factorization");
  const double h = 1.0 / (2.0 * box.d);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * (2 * box.d + 1));
  for (VertexId v = 0; v < n; ++v) {
    trip.emplace_back(static_cast<int>(v), static_cast<int>(v), 1.0);
    for (int dir = 0; dir < 2 * box.d; ++dir) {
      VertexId w = lat.step(v, dir);
      if (w != kNoVertex) trip.emplace_back(static_cast<int>(v), static_cast<int>(w), -h);
    }
  }
  Eigen::SparseMatrix<double> Q(static_cast<int>(n), static_cast<int>(n));
  Q.setFromTriplets(trip.begin(), trip.end());
  impl_->llt.compute(Q);
  if (impl_->llt.info() != Eigen::Success) throw NumericError("Cholesky factorization of the precision failed");
}

GffSampler::~GffSampler() = default;
GffSampler::GffSampler(GffSampler&&) noexcept = default;
GffSampler& GffSampler::operator=(GffSampler&&) noexcept = default;

const BoxConfig& GffSampler::box() const { return impl_->box; }

GFFSample GffSampler::sample(std::uint64_t seed) const {
  const auto& llt = impl_->llt;
  const Eigen::Index n = llt.rows();
  Rng rng = make_rng(seed, Stream::kGffField);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (Eigen::Index k = 0; k < n; ++k) z[k] = normal(rng);
  // Q = P^T L L^T P, so x = P^T L^{-T} z has covariance Q^{-1}.
  Eigen::VectorXd y = llt.matrixU().solve(z);
  Eigen::VectorXd x = llt.permutationPinv() * y;
  GFFSample s;
  s.box = impl_->box;
  s.seed = seed;
  s.phi.assign(x.data(), x.data() + n);
  return s;
}

GFFSample sample_gff(const GreenTable& g, std::uint64_t seed) {
  GffSampler sampler(g.box());
  return sampler.sample(seed);
}

GFFSample open_edges(GFFSample s, std::uint64_t seed, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  Lattice lat(s.box);
  s.kappa = kappa;
  s.edge_open.assign(static_cast<std::size_t>(lat.edge_slots()), false);
  Rng rng = make_rng(seed, Stream::kGffEdges);
  const std::int64_t V = lat.volume(), side = lat.side();
  const int d = lat.dim();
  for (int axis = 0; axis < d; ++axis) {
    const std::int64_t st = lat.stride(axis), block = st * side;
    for (std::int64_t base = 0; base < V; base += block) {
      for (std::int64_t c = 0; c + 1 < side; ++c) {
        for (std::int64_t low = 0; low < st; ++low) {
          const std::int64_t a = base + c * st + low;
          double u = uniform01(rng);
          double t = kappa * s.phi[static_cast<std::size_t>(a)] * s.phi[static_cast<std::size_t>(a + st)];
          if (bernoulli_one_minus_exp(t, u)) s.edge_open[static_cast<std::size_t>(a * d + axis)] = true;
        }
      }
    }
  }
  return s;
}

std::vector<std::uint32_t> sign_cluster_labels(const GFFSample& s) {
  if (!s.has_edges()) throw PreconditionError("sign_clusters needs edge bits");
  Lattice lat(s.box);
  UnionFind uf(lat.volume());
  const int d = lat.dim();
  for (std::int64_t e = 0; e < lat.edge_slots(); ++e) {
    if (!s.edge_open[static_cast<std::size_t>(e)]) continue;
    VertexId a = e / d;
    VertexId b = a + lat.stride(static_cast<int>(e % d));
    uf.unite(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
  }
  return uf.labels();
}

std::vector<SignCluster> sign_clusters(const GFFSample& s) {
  auto labels = sign_cluster_labels(s);
  std::vector<int> index(labels.size(), -1);
  std::vector<SignCluster> out;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    auto r = labels[v];
    if (index[r] < 0) {
      index[r] = static_cast<int>(out.size());
      SignCluster c;
      c.sign = s.phi[v] >= 0.0 ? 1 : -1;
      out.push_back(std::move(c));
    }
    out[static_cast<std::size_t>(index[r])].vertices.push_back(static_cast<VertexId>(v));
  }
  return out;
}

std::int64_t sign_cluster_count(const GFFSample& s) {
  auto labels = sign_cluster_labels(s);
  std::int64_t n = 0;
  for (std::size_t v = 0; v < labels.size(); ++v) n += (labels[v] == v);
  return n;
}

void write_sign_clusters_ndjson(std::ostream& os, const Lattice& lat,
                                const std::vector<SignCluster>& clusters) {
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    nlohmann::json j;
    j["cluster_id"] = k;
    j["sign"] = clusters[k].sign;
    auto arr = nlohmann::json::array();
    for (VertexId v : clusters[k].vertices) arr.push_back(lat.coords(v));
    j["vertices"] = std::move(arr);
    os << j.dump() << '\n';
  }
}

std::string field_header_json(const GFFSample& s) {
  nlohmann::json j;
  j["dims"] = s.box.d;
  j["N"] = s.box.N;
  j["seed"] = s.seed;
  j["dtype"] = "float64-le";
  j["layout"] = "vertex id = sum_k (x_k + N) (2N+1)^k";
  j["count"] = s.phi.size();
  return j.dump();
}

void write_field_binary(std::ostream& os, const GFFSample& s) {
  os.write(reinterpret_cast<const char*>(s.phi.data()),
           static_cast<std::streamsize>(s.phi.size() * sizeof(double)));
}

}  // namespace loopcycle
