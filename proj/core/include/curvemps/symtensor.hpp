#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curvemps/errors.hpp"

namespace curvemps {

// Abelian charge (N_up, N_down) under componentwise addition.
struct Charge {
  int up = 0;
  int down = 0;

  Charge operator+(Charge o) const { return {up + o.up, down + o.down}; }
  Charge operator-(Charge o) const { return {up - o.up, down - o.down}; }
  Charge operator-() const { return {-up, -down}; }
  Charge& operator+=(Charge o) {
    up += o.up;
    down += o.down;
    return *this;
  }
  int parity() const { return ((up + down) % 2 + 2) % 2; }
  friend auto operator<=>(const Charge&, const Charge&) = default;
};

std::string to_string(Charge q);

enum class Direction : std::uint8_t { In, Out };

inline Direction flip(Direction d) { return d == Direction::In ? Direction::Out : Direction::In; }
inline int sign(Direction d) { return d == Direction::Out ? 1 : -1; }

struct Sector {
  Charge charge;
  int dim = 0;
  friend bool operator==(const Sector&, const Sector&) = default;
};

class Leg {
 public:
  Leg() = default;
  Leg(Direction dir, std::vector<Sector> sectors);

  Direction direction() const { return dir_; }
  const std::vector<Sector>& sectors() const { return sectors_; }
  int n_sectors() const { return static_cast<int>(sectors_.size()); }
  int dim(int sector) const { return sectors_[sector].dim; }
  Charge charge(int sector) const { return sectors_[sector].charge; }
  int total_dim() const;
  // Offset of a sector inside the dense (unblocked) index range.
  int offset(int sector) const;
  // Sector index carrying the charge, or -1.
  int find(Charge q) const;

  Leg dual() const;
  bool same_space(const Leg& other) const { return sectors_ == other.sectors_; }

  friend bool operator==(const Leg& a, const Leg& b) {
    return a.dir_ == b.dir_ && a.sectors_ == b.sectors_;
  }

 private:
  Direction dir_ = Direction::In;
  std::vector<Sector> sectors_;
  std::vector<std::pair<Charge, int>> lookup_;  // sorted by charge
};

inline constexpr int kMaxRank = 8;

struct BlockKey {
  std::array<std::int16_t, kMaxRank> idx{};
  std::uint8_t rank = 0;

  BlockKey() = default;
  BlockKey(std::initializer_list<int> sectors);
  static BlockKey of_rank(int r) {
    BlockKey k;
    k.rank = static_cast<std::uint8_t>(r);
    return k;
  }
  int operator[](int i) const { return idx[i]; }
  std::int16_t& operator[](int i) { return idx[i]; }
  friend auto operator<=>(const BlockKey&, const BlockKey&) = default;
};

// Charge-conserving block-sparse tensor of real scalars. A block is stored
// only if (sum of outgoing charges) - (sum of incoming charges) == flux.
// Block payloads are dense row-major arrays shaped by the sector degeneracies.
class BlockTensor {
 public:
  using BlockMap = std::map<BlockKey, std::vector<double>>;

  BlockTensor() = default;
  explicit BlockTensor(std::vector<Leg> legs, Charge flux = {});

  int rank() const { return static_cast<int>(legs_.size()); }
  const Leg& leg(int i) const { return legs_[i]; }
  const std::vector<Leg>& legs() const { return legs_; }
  Charge flux() const { return flux_; }

  bool allowed(const BlockKey& key) const;
  std::vector<int> block_shape(const BlockKey& key) const;
  std::size_t block_size(const BlockKey& key) const;

  const BlockMap& blocks() const { return blocks_; }
  std::size_t n_blocks() const { return blocks_.size(); }
  std::size_t n_elements() const;
  bool has_block(const BlockKey& key) const { return blocks_.count(key) != 0; }
  const std::vector<double>* find_block(const BlockKey& key) const;
  // Returns the block, creating a zero-filled one if absent. Throws ShapeError
  // for keys that violate the charge rule.
  std::vector<double>& block(const BlockKey& key);
  void set_block(const BlockKey& key, std::vector<double> data);
  void erase_block(const BlockKey& key) { blocks_.erase(key); }

  // Enumerates every key allowed by the charge rule (dense-equivalent support).
  std::vector<BlockKey> allowed_keys() const;

  double norm() const;
  double max_abs() const;
  void scale(double factor);
  // this += alpha * other (same legs and flux)
  void axpy(double alpha, const BlockTensor& other);
  BlockTensor permute(std::span<const int> perm) const;
  BlockTensor permute(std::initializer_list<int> perm) const {
    return permute(std::span<const int>(perm.begin(), perm.size()));
  }
  // Same payloads, every leg direction and the flux flipped (the adjoint for real scalars).
  BlockTensor dual() const;
  // Drops blocks whose entries are all exactly zero.
  void prune();

  std::vector<double> to_dense() const;
  static BlockTensor from_dense(std::vector<Leg> legs, Charge flux, std::span<const double> dense,
                                double tol = 0.0);

  static BlockTensor random(std::vector<Leg> legs, Charge flux, std::mt19937_64& rng);
  // Legs [leg.dual(), leg]; contracting leg k of T with leg 0 leaves T unchanged
  // apart from moving leg k to the end.
  static BlockTensor identity(const Leg& leg);

  // Throws ShapeError if any stored block breaks the charge rule or has a wrong size.
  void check() const;

 private:
  std::vector<Leg> legs_;
  Charge flux_;
  BlockMap blocks_;
};

double dot(const BlockTensor& a, const BlockTensor& b);

// Contracts leg pairs (a_leg, b_leg). Paired legs must carry the same sectors
// with opposite directions. Result legs: free legs of a, then free legs of b.
BlockTensor contract(const BlockTensor& a, const BlockTensor& b,
                     std::span<const std::pair<int, int>> leg_pairs);
inline BlockTensor contract(const BlockTensor& a, const BlockTensor& b,
                            std::initializer_list<std::pair<int, int>> leg_pairs) {
  return contract(a, b, std::span<const std::pair<int, int>>(leg_pairs.begin(), leg_pairs.size()));
}

// Applies a rank-2 operator (legs [like t.leg(k), t.leg(k).dual()]) to leg k of t,
// keeping the leg order of t.
BlockTensor apply_on_leg(const BlockTensor& op, const BlockTensor& t, int k);

struct TruncationSpec {
  int max_dim = 1;
  double discard_cutoff = 0.0;  // relative discarded weight allowed beyond max_dim
};

struct SVDResult {
  BlockTensor left;    // legs: left legs of t, then bond (Out); isometry
  BlockTensor right;   // legs: bond (In), then the remaining legs of t; carries t's flux
  std::vector<std::vector<double>> sector_values;  // per bond sector, descending
  std::vector<double> singular_values;             // kept values, globally descending
  double discarded_weight = 0.0;                   // dropped / total squared weight
  Leg bond() const { return left.leg(left.rank() - 1); }
};

SVDResult svd_truncate(const BlockTensor& t, std::span<const int> left_legs,
                       const TruncationSpec& spec);
inline SVDResult svd_truncate(const BlockTensor& t, std::initializer_list<int> left_legs,
                              const TruncationSpec& spec) {
  return svd_truncate(t, std::span<const int>(left_legs.begin(), left_legs.size()), spec);
}

// Scales slice i of leg `leg` (a bond produced by svd_truncate) by the singular values.
void scale_by_singular_values(BlockTensor& t, int leg,
                              const std::vector<std::vector<double>>& sector_values);

struct QRResult {
  BlockTensor isometry;   // legs: left legs, then bond (Out)
  BlockTensor remainder;  // legs: bond (In), then the remaining legs
};

QRResult qr_orthogonalize(const BlockTensor& t, std::span<const int> left_legs);
inline QRResult qr_orthogonalize(const BlockTensor& t, std::initializer_list<int> left_legs) {
  return qr_orthogonalize(t, std::span<const int>(left_legs.begin(), left_legs.size()));
}

struct EighResult {
  BlockTensor isometry;  // legs: the first n legs of rho, then bond (Out)
  std::vector<double> kept_values;
  double discarded_weight = 0.0;
};

// Dominant eigenvectors of a symmetric positive semi-definite tensor rho with
// legs [L..., L.dual()...] (n_left legs each side), ranked globally across sectors.
EighResult eigh_truncate(const BlockTensor& rho, int n_left, const TruncationSpec& spec);

// Text manifest of legs, sectors and block norms for golden-file tests.
void write_manifest(std::ostream& out, const BlockTensor& t);

// Floating-point operations issued by the dense kernels behind contract,
// svd_truncate, qr_orthogonalize and eigh_truncate (multiply-add counted as 2).
std::uint64_t flop_count();
void reset_flop_count();
void add_flops(std::uint64_t n);

}  // namespace curvemps
