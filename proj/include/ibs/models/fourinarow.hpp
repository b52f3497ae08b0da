#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ibs/models/model.hpp"

namespace ibs {

/// 4 x 9 board without gravity; black moves first. Cell index = row * 9 + col.
struct Board {
  static constexpr int kRows = 4;
  static constexpr int kCols = 9;
  static constexpr int kCells = kRows * kCols;
  static constexpr std::uint64_t kFullMask = (std::uint64_t{1} << kCells) - 1;

  std::uint64_t black = 0;
  std::uint64_t white = 0;

  enum Player : int { Black = 0, White = 1 };

  [[nodiscard]] int pieces() const noexcept;
  [[nodiscard]] Player to_move() const noexcept;
  [[nodiscard]] std::uint64_t occupied() const noexcept { return black | white; }
  [[nodiscard]] std::uint64_t empty_cells() const noexcept { return ~occupied() & kFullMask; }
  [[nodiscard]] std::uint64_t stones(Player p) const noexcept { return p == Black ? black : white; }
  [[nodiscard]] bool is_empty(int cell) const noexcept { return ((empty_cells() >> cell) & 1U) != 0; }
  [[nodiscard]] Board with_move(int cell) const;
  [[nodiscard]] bool has_four(Player p) const noexcept;
  [[nodiscard]] std::vector<int> legal_moves() const;
  /// Piece counts consistent with alternation, no overlap, no completed four.
  [[nodiscard]] bool is_legal_position() const noexcept;

  friend bool operator==(const Board&, const Board&) = default;
};

enum FeatureClass : int { kCenter = 0, kConnectedTwo, kUnconnectedTwo, kThree, kFour, kFeatureClasses };

/// Feature values per player, indexed [player][class].
struct FeatureCounts {
  std::array<std::array<double, kFeatureClasses>, 2> value{};
  friend bool operator==(const FeatureCounts&, const FeatureCounts&) = default;
};

struct FourInARowWeights {
  std::array<double, kFeatureClasses> w{0.60913, 0.90444, 0.45076, 3.4272, 6.1728};
  /// Scale on the passive player's features.
  double c_act = 0.92498;
};

/// All 45 four-cell windows, each as its cells in line order.
const std::vector<std::array<int, 4>>& fourinarow_windows();

/// Full scan over every window.
FeatureCounts fourinarow_features(const Board& board);

/// Features after `player` places a stone on `cell`, updating only the
/// windows through that cell.
FeatureCounts fourinarow_features_after(const Board& board, const FeatureCounts& before, int cell);

/// Heuristic player: best-first search with a noisy, feature-dropping value
/// function and value-based pruning. theta = (eta = log sigma, xi, delta).
class FourInARowModel {
 public:
  using Stimulus = Board;
  using Response = int;
  struct Params {
    double sigma;
    double xi;
    double delta;
    double lapse;
    int node_budget;
    FourInARowWeights weights;
  };
  static constexpr bool kConcurrentSafe = true;
  static constexpr std::string_view kName = "fourinarow";
  static constexpr int kDefaultTrials = 100;
  static constexpr double kLapse = 0.05;
  static constexpr double kTreeGamma = 0.02;
  /// Value of a completed four, far above any feature sum.
  static constexpr double kWinValue = 1000.0;

  [[nodiscard]] ParameterSpace parameter_space() const;
  [[nodiscard]] Params prepare(std::span<const double> theta) const;
  Response simulate(const Board& board, const Params& p, Rng& rng) const;

  /// Noisy value of playing `move` for the player to move on `board`.
  [[nodiscard]] static double value(const Board& board, int move, const Params& p, Rng& rng);

  /// Parameters used for self-play position generation.
  [[nodiscard]] static std::vector<double> baseline_theta();

  /// Legal, non-terminal positions reached by baseline self-play after a few
  /// random opening moves.
  [[nodiscard]] std::vector<Board> generate_positions(int count, std::uint64_t seed) const;
  [[nodiscard]] DatasetFor<FourInARowModel> generate(int n, std::span<const double> theta, std::uint64_t seed) const;

  static std::string_view fields() { return "black_hex,white_hex,move"; }
  static void format_trial(std::string& out, const Trial<Stimulus, Response>& t);
  static Trial<Stimulus, Response> parse_trial(std::string_view line);
};

}  // namespace ibs
