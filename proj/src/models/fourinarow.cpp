#include "ibs/models/fourinarow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ibs/text_format.hpp"

namespace ibs {

namespace {

constexpr double kCenterRow = 1.5;
constexpr double kCenterCol = 4.0;

struct WindowTables {
  std::vector<std::array<int, 4>> windows;
  std::vector<std::uint64_t> masks;
  // the three adjacent-pair masks of each window
  std::vector<std::array<std::uint64_t, 3>> pairs;
  std::array<std::vector<int>, Board::kCells> by_cell;
  std::array<double, Board::kCells> center{};

  WindowTables() {
    auto add = [&](int r, int c, int dr, int dc) {
      std::array<int, 4> w{};
      std::uint64_t m = 0;
      for (int k = 0; k < 4; ++k) {
        w[k] = (r + k * dr) * Board::kCols + (c + k * dc);
        m |= std::uint64_t{1} << w[k];
      }
      const int id = static_cast<int>(windows.size());
      windows.push_back(w);
      masks.push_back(m);
      std::array<std::uint64_t, 3> pr{};
      for (int k = 0; k < 3; ++k) pr[k] = (std::uint64_t{1} << w[k]) | (std::uint64_t{1} << w[k + 1]);
      pairs.push_back(pr);
      for (int cell : w) by_cell[cell].push_back(id);
    };
    for (int r = 0; r < Board::kRows; ++r)
      for (int c = 0; c + 3 < Board::kCols; ++c) add(r, c, 0, 1);
    for (int c = 0; c < Board::kCols; ++c) add(0, c, 1, 0);
    for (int c = 0; c + 3 < Board::kCols; ++c) add(0, c, 1, 1);
    for (int c = 0; c + 3 < Board::kCols; ++c) add(3, c, -1, 1);
    for (int cell = 0; cell < Board::kCells; ++cell) {
      const double dr = cell / Board::kCols - kCenterRow;
      const double dc = cell % Board::kCols - kCenterCol;
      center[cell] = 1.0 / std::sqrt(dr * dr + dc * dc);
    }
  }
};

const WindowTables& tables() {
  static const WindowTables t;
  return t;
}

// Adds sign * (pattern contribution of window w) for both players.
void add_window(const WindowTables& t, int w, std::uint64_t black, std::uint64_t white, double sign,
                FeatureCounts& f) {
  const std::uint64_t m = t.masks[w];
  const std::uint64_t stones[2] = {black & m, white & m};
  for (int p = 0; p < 2; ++p) {
    if (stones[1 - p] != 0) continue;
    const std::uint64_t own = stones[p];
    switch (std::popcount(own)) {
      case 2: {
        const auto& pr = t.pairs[w];
        const bool connected = own == pr[0] || own == pr[1] || own == pr[2];
        f.value[p][connected ? kConnectedTwo : kUnconnectedTwo] += sign;
        break;
      }
      case 3: f.value[p][kThree] += sign; break;
      case 4: f.value[p][kFour] += sign; break;
      default: break;
    }
  }
}

double evaluate_for(const FeatureCounts& f, int mover, const FourInARowModel::Params& p, Rng& rng) {
  double v = 0.0;
  const int opp = 1 - mover;
  for (int k = 0; k < kFeatureClasses; ++k) {
    if (p.delta <= 0.0 || rng.uniform() >= p.delta) v += p.weights.w[k] * f.value[mover][k];
  }
  for (int k = 0; k < kFeatureClasses; ++k) {
    if (p.delta <= 0.0 || rng.uniform() >= p.delta) v -= p.weights.c_act * p.weights.w[k] * f.value[opp][k];
  }
  return v + p.sigma * rng.normal();
}

struct Node {
  Board board;
  FeatureCounts features;
  int move = -1;
  int parent = -1;
  int first_child = -1;
  int child_count = 0;
  double value = 0.0;  // from the root player's point of view
  bool expanded = false;
  bool terminal = false;
};

int uniform_legal_move(const Board& b, Rng& rng) {
  std::uint64_t empty = b.empty_cells();
  const int n = std::popcount(empty);
  if (n == 0) throw std::logic_error("fourinarow: no legal moves");
  int pick = static_cast<int>(rng.below(static_cast<std::uint32_t>(n)));
  while (pick-- > 0) empty &= empty - 1;
  return std::countr_zero(empty);
}

}  // namespace

int Board::pieces() const noexcept { return std::popcount(black) + std::popcount(white); }

Board::Player Board::to_move() const noexcept {
  return std::popcount(black) == std::popcount(white) ? Black : White;
}

Board Board::with_move(int cell) const {
  if (cell < 0 || cell >= kCells || !is_empty(cell)) throw std::invalid_argument("fourinarow: illegal move");
  Board b = *this;
  (to_move() == Black ? b.black : b.white) |= std::uint64_t{1} << cell;
  return b;
}

bool Board::has_four(Player p) const noexcept {
  const std::uint64_t s = stones(p);
  for (std::uint64_t m : tables().masks) {
    if ((s & m) == m) return true;
  }
  return false;
}

std::vector<int> Board::legal_moves() const {
  std::vector<int> out;
  for (std::uint64_t e = empty_cells(); e != 0; e &= e - 1) out.push_back(std::countr_zero(e));
  return out;
}

bool Board::is_legal_position() const noexcept {
  if ((black & white) != 0 || ((black | white) & ~kFullMask) != 0) return false;
  const int diff = std::popcount(black) - std::popcount(white);
  if (diff != 0 && diff != 1) return false;
  return !has_four(Black) && !has_four(White);
}

const std::vector<std::array<int, 4>>& fourinarow_windows() { return tables().windows; }

FeatureCounts fourinarow_features(const Board& board) {
  if (!board.is_legal_position()) throw std::invalid_argument("fourinarow: illegal board");
  const auto& t = tables();
  FeatureCounts f;
  for (int w = 0; w < static_cast<int>(t.masks.size()); ++w) add_window(t, w, board.black, board.white, 1.0, f);
  for (std::uint64_t s = board.black; s != 0; s &= s - 1) f.value[0][kCenter] += t.center[std::countr_zero(s)];
  for (std::uint64_t s = board.white; s != 0; s &= s - 1) f.value[1][kCenter] += t.center[std::countr_zero(s)];
  return f;
}

FeatureCounts fourinarow_features_after(const Board& board, const FeatureCounts& before, int cell) {
  const auto& t = tables();
  const Board next = board.with_move(cell);
  FeatureCounts f = before;
  for (int w : t.by_cell[cell]) {
    add_window(t, w, board.black, board.white, -1.0, f);
    add_window(t, w, next.black, next.white, 1.0, f);
  }
  f.value[board.to_move()][kCenter] += t.center[cell];
  return f;
}

ParameterSpace FourInARowModel::parameter_space() const {
  return ParameterSpace({
      {"eta", std::log(0.01), std::log(5.0), std::log(0.2), std::log(3.0)},
      {"xi", 0.01, 10.0, 1.0, 10.0},
      {"delta", 0.0, 1.0, 0.0, 0.5},
  });
}

FourInARowModel::Params FourInARowModel::prepare(std::span<const double> theta) const {
  if (theta.size() != 3) throw std::invalid_argument("fourinarow model expects (eta, xi, delta)");
  if (!(theta[2] >= 0.0 && theta[2] <= 1.0)) throw std::invalid_argument("fourinarow model: delta outside [0, 1]");
  if (!(theta[1] >= 0.0)) throw std::invalid_argument("fourinarow model: xi must be non-negative");
  return {std::exp(theta[0]), theta[1], theta[2], kLapse, static_cast<int>(std::ceil(1.0 / kTreeGamma - 1e-9)), {}};
}

std::vector<double> FourInARowModel::baseline_theta() { return {std::log(1.0), 5.0, 0.2}; }

double FourInARowModel::value(const Board& board, int move, const Params& p, Rng& rng) {
  const int mover = board.to_move();
  const auto f = fourinarow_features_after(board, fourinarow_features(board), move);
  return evaluate_for(f, mover, p, rng);
}

FourInARowModel::Response FourInARowModel::simulate(const Board& board, const Params& p, Rng& rng) const {
  if (board.empty_cells() == 0) throw std::logic_error("fourinarow: no legal moves");
  if (rng.uniform() < p.lapse) return uniform_legal_move(board, rng);

  thread_local std::vector<Node> nodes;
  thread_local std::vector<Node> scratch;
  nodes.clear();
  const int root_player = board.to_move();
  nodes.push_back(Node{board, fourinarow_features(board)});

  for (int expansion = 0; expansion < p.node_budget; ++expansion) {
    // follow the principal variation down to a leaf
    int n = 0;
    while (nodes[n].expanded && nodes[n].child_count > 0) {
      const bool maximize = nodes[n].board.to_move() == root_player;
      int best = nodes[n].first_child;
      for (int c = best + 1; c < nodes[n].first_child + nodes[n].child_count; ++c) {
        if (maximize ? nodes[c].value > nodes[best].value : nodes[c].value < nodes[best].value) best = c;
      }
      n = best;
    }
    if (nodes[n].terminal) break;

    const Board parent = nodes[n].board;
    const FeatureCounts parent_features = nodes[n].features;
    const int mover = parent.to_move();
    const double sign = mover == root_player ? 1.0 : -1.0;
    scratch.clear();
    double best_own = -std::numeric_limits<double>::infinity();
    for (std::uint64_t e = parent.empty_cells(); e != 0; e &= e - 1) {
      const int cell = std::countr_zero(e);
      Node child;
      child.board = parent.with_move(cell);
      child.features = fourinarow_features_after(parent, parent_features, cell);
      child.move = cell;
      child.parent = n;
      double own = 0.0;
      if (child.features.value[mover][kFour] > 0.0) {
        child.terminal = true;
        own = kWinValue;
      } else if (child.board.empty_cells() == 0) {
        child.terminal = true;
        own = 0.0;
      } else {
        own = evaluate_for(child.features, mover, p, rng);
      }
      child.value = sign * own;
      best_own = std::max(best_own, own);
      scratch.push_back(child);
    }
    nodes[n].first_child = static_cast<int>(nodes.size());
    for (const auto& child : scratch) {
      if (sign * child.value >= best_own - p.xi) nodes.push_back(child);
    }
    nodes[n].child_count = static_cast<int>(nodes.size()) - nodes[n].first_child;
    nodes[n].expanded = true;

    for (int cur = n; cur >= 0; cur = nodes[cur].parent) {
      const Node& node = nodes[cur];
      const bool maximize = node.board.to_move() == root_player;
      double v = nodes[node.first_child].value;
      for (int c = node.first_child + 1; c < node.first_child + node.child_count; ++c) {
        v = maximize ? std::max(v, nodes[c].value) : std::min(v, nodes[c].value);
      }
      nodes[cur].value = v;
    }
  }

  int best = nodes[0].first_child;
  for (int c = best + 1; c < nodes[0].first_child + nodes[0].child_count; ++c) {
    if (nodes[c].value > nodes[best].value) best = c;
  }
  return nodes[best].move;
}

std::vector<Board> FourInARowModel::generate_positions(int count, std::uint64_t seed) const {
  if (count < 1) throw std::invalid_argument("generate_positions: count must be >= 1");
  const auto base = prepare(baseline_theta());
  std::vector<Board> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    const int opening = static_cast<int>(rng.below(5));
    const int target = opening + 2 + static_cast<int>(rng.below(17));
    Board b;
    bool ended = false;
    for (int ply = 0; ply < target; ++ply) {
      const int mover = b.to_move();
      const int move = ply < opening ? uniform_legal_move(b, rng) : simulate(b, base, rng);
      b = b.with_move(move);
      if (b.has_four(static_cast<Board::Player>(mover)) || b.empty_cells() == 0) {
        ended = true;
        break;
      }
    }
    if (!ended) out.push_back(b);
  }
  return out;
}

DatasetFor<FourInARowModel> FourInARowModel::generate(int n, std::span<const double> theta, std::uint64_t seed) const {
  const auto params = prepare(theta);
  DatasetFor<FourInARowModel> data;
  data.model = std::string(kName);
  data.theta.assign(theta.begin(), theta.end());
  data.seed = seed;
  const auto positions = generate_positions(n, derive_seed(seed, 0xB0A2D));
  Rng rng(derive_seed(seed, 0x4E5));
  for (const auto& b : positions) data.trials.push_back({b, simulate(b, params, rng)});
  return data;
}

void FourInARowModel::format_trial(std::string& out, const Trial<Stimulus, Response>& t) {
  char buf[24];
  auto hex = [&](std::uint64_t v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
    out.append(buf, res.ptr);
  };
  hex(t.stimulus.black);
  out.push_back(',');
  hex(t.stimulus.white);
  out.push_back(',');
  append_number(out, static_cast<std::int64_t>(t.response));
}

Trial<FourInARowModel::Stimulus, FourInARowModel::Response> FourInARowModel::parse_trial(std::string_view line) {
  const auto f = split(line, ',');
  if (f.size() != 3) throw DataError("fourinarow trial needs 3 fields");
  Trial<Stimulus, Response> t;
  t.stimulus.black = parse_integer<std::uint64_t>(f[0], 16);
  t.stimulus.white = parse_integer<std::uint64_t>(f[1], 16);
  t.response = parse_integer<int>(f[2]);
  if (!t.stimulus.is_legal_position()) throw DataError("fourinarow trial holds an illegal position");
  if (t.response < 0 || t.response >= Board::kCells || !t.stimulus.is_empty(t.response)) {
    throw DataError("fourinarow move is not a legal move for its position");
  }
  return t;
}

}  // namespace ibs
