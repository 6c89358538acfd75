#include "visitrl/gridworld.hpp"

#include <cassert>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace visitrl {

namespace {

constexpr int kDx[kGridDirections] = {1, 0, -1, 0};
constexpr int kDy[kGridDirections] = {0, 1, 0, -1};

GridSpec empty_spec(int width, int height) {
  if (width < 3 || height < 3)
    throw std::invalid_argument("Empty grid needs at least 3x3 cells");
  GridSpec spec;
  spec.name = "Empty-" + std::to_string(width) + "x" + std::to_string(height);
  spec.width = width;
  spec.height = height;
  spec.walls.assign(static_cast<std::size_t>(width * height), 0);
  for (int x = 0; x < width; ++x) {
    spec.walls[static_cast<std::size_t>(x)] = 1;
    spec.walls[static_cast<std::size_t>((height - 1) * width + x)] = 1;
  }
  for (int y = 0; y < height; ++y) {
    spec.walls[static_cast<std::size_t>(y * width)] = 1;
    spec.walls[static_cast<std::size_t>(y * width + width - 1)] = 1;
  }
  spec.start = {1, 1};
  spec.start_dir = 0;
  spec.goal = {width - 2, height - 2};
  return spec;
}

GridSpec crossing_spec(int size) {
  if (size < 5) throw std::invalid_argument("SimpleCrossing needs size >= 5");
  GridSpec spec = empty_spec(size, size);
  spec.name = "SimpleCrossingS" + std::to_string(size) + "N1";
  spec.crossing_walls = 1;
  return spec;
}

GridSpec four_rooms_spec() {
  constexpr int size = 19;
  GridSpec spec = empty_spec(size, size);
  spec.name = "FourRooms";
  const int mid = size / 2;            // 9
  const int door_lo = (1 + mid - 1) / 2;        // 4
  const int door_hi = (mid + 1 + size - 2) / 2; // 13
  for (int y = 1; y < size - 1; ++y)
    if (y != door_lo && y != door_hi)
      spec.walls[static_cast<std::size_t>(y * size + mid)] = 1;
  for (int x = 1; x < size - 1; ++x)
    if (x != door_lo && x != door_hi)
      spec.walls[static_cast<std::size_t>(mid * size + x)] = 1;
  spec.start_mode = StartMode::RandomPerEpisode;
  spec.goal_mode = GoalMode::RandomPerEpisode;
  return spec;
}

}  // namespace

bool GridSpec::wall_at(int x, int y) const {
  if (!in_bounds(x, y)) return true;
  return walls[static_cast<std::size_t>(y * width + x)] != 0;
}

GridSpec make_grid_spec(const std::string& id) {
  int w = 0, h = 0, size = 0;
  if (std::sscanf(id.c_str(), "Empty-%dx%d", &w, &h) == 2) return empty_spec(w, h);
  if (std::sscanf(id.c_str(), "SimpleCrossingS%dN1", &size) == 1) return crossing_spec(size);
  if (id == "FourRooms") return four_rooms_spec();
  throw std::invalid_argument("unknown environment id: " + id);
}

std::vector<std::string> registered_environments() {
  return {"Empty-6x6", "Empty-16x16", "SimpleCrossingS9N1", "SimpleCrossingS15N1",
          "FourRooms"};
}

GridSpec parse_map(const std::string& text, const std::string& name) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("parse_map: empty map");
  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  GridSpec spec;
  spec.name = name;
  spec.width = width;
  spec.height = height;
  spec.walls.assign(static_cast<std::size_t>(width * height), 0);
  bool have_start = false, have_goal = false;
  for (int y = 0; y < height; ++y) {
    if (static_cast<int>(rows[y].size()) != width)
      throw std::invalid_argument("parse_map: ragged rows");
    for (int x = 0; x < width; ++x) {
      switch (rows[y][static_cast<std::size_t>(x)]) {
        case '#': spec.walls[static_cast<std::size_t>(y * width + x)] = 1; break;
        case '.': break;
        case 'S':
          if (have_start) throw std::invalid_argument("parse_map: multiple start cells");
          spec.start = {x, y};
          have_start = true;
          break;
        case 'G':
          if (have_goal) throw std::invalid_argument("parse_map: multiple goal cells");
          spec.goal = {x, y};
          have_goal = true;
          break;
        default:
          throw std::invalid_argument("parse_map: unknown cell character");
      }
    }
  }
  if (!have_start || !have_goal)
    throw std::invalid_argument("parse_map: map needs one 'S' and one 'G'");
  return spec;
}

GridSpec load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_map_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str(), path);
}

GridEnv::GridEnv(GridSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.width < 2 || spec_.height < 2)
    throw std::invalid_argument("GridEnv: degenerate grid");

  if (spec_.crossing_walls > 0) {
    // One interior wall with a single passage, sampled once per environment.
    Rng rng(derive_seed(seed, 0x9c5));
    if (spec_.width != spec_.height)
      throw std::invalid_argument("GridEnv: crossing layouts must be square");
    const int size = spec_.width;
    const int orientation = rng.uniform_int(2);  // 0 vertical, 1 horizontal
    const int coord = 2 + rng.uniform_int(size - 5);
    const int gap = 1 + rng.uniform_int(size - 2);
    for (int t = 1; t < size - 1; ++t) {
      if (t == gap) continue;
      const int x = orientation == 0 ? coord : t;
      const int y = orientation == 0 ? t : coord;
      spec_.walls[static_cast<std::size_t>(y * spec_.width + x)] = 1;
    }
    passage_components_ = {orientation, coord, gap};
    passage_widths_ = {2, size, size};
  }

  cell_index_map_.assign(static_cast<std::size_t>(spec_.width * spec_.height), -1);
  for (int y = 0; y < spec_.height; ++y)
    for (int x = 0; x < spec_.width; ++x)
      if (!spec_.wall_at(x, y)) {
        cell_index_map_[static_cast<std::size_t>(y * spec_.width + x)] =
            static_cast<int>(cells_.size());
        cells_.push_back({x, y});
      }
  if (cells_.empty()) throw std::invalid_argument("GridEnv: no free cells");

  if (spec_.start_mode == StartMode::Fixed && cell_index(spec_.start) < 0)
    throw std::invalid_argument("GridEnv: start cell is a wall");
  if (spec_.goal_mode == GoalMode::Fixed) {
    if (cell_index(spec_.goal) < 0)
      throw std::invalid_argument("GridEnv: goal cell is a wall");
    if (spec_.start_mode == StartMode::Fixed && spec_.start == spec_.goal)
      throw std::invalid_argument("GridEnv: start and goal coincide");
  }

  widths_ = {spec_.width, spec_.height, kGridDirections};
  widths_.insert(widths_.end(), passage_widths_.begin(), passage_widths_.end());
  if (random_goal()) {
    widths_.push_back(spec_.width);
    widths_.push_back(spec_.height);
  }
}

int GridEnv::cell_index(GridPos pos) const {
  if (!spec_.in_bounds(pos.x, pos.y)) return -1;
  return cell_index_map_[static_cast<std::size_t>(pos.y * spec_.width + pos.x)];
}

int GridEnv::state_count() const {
  return random_goal() ? base_state_count() * cell_count() : base_state_count();
}

GridState GridEnv::decode(int state) const {
  if (state < 0 || state >= state_count())
    throw std::out_of_range("GridEnv::decode: bad state index");
  GridState out;
  int base = state;
  if (random_goal()) {
    out.goal_pos = cells_[static_cast<std::size_t>(state % cell_count())];
    base = state / cell_count();
  }
  out.agent_dir = base % kGridDirections;
  out.agent_pos = cells_[static_cast<std::size_t>(base / kGridDirections)];
  return out;
}

int GridEnv::state_index(const GridState& s) const {
  const int cell = cell_index(s.agent_pos);
  if (cell < 0) throw std::invalid_argument("GridEnv::state_index: agent on a wall");
  if (s.agent_dir < 0 || s.agent_dir >= kGridDirections)
    throw std::invalid_argument("GridEnv::state_index: bad direction");
  const int base = cell * kGridDirections + s.agent_dir;
  if (!random_goal()) return base;
  if (!s.goal_pos) throw std::invalid_argument("GridEnv::state_index: goal missing");
  const int goal = cell_index(*s.goal_pos);
  if (goal < 0) throw std::invalid_argument("GridEnv::state_index: goal on a wall");
  return base * cell_count() + goal;
}

GridPos GridEnv::agent_position(int state) const {
  const int base = random_goal() ? state / cell_count() : state;
  return cells_[static_cast<std::size_t>(base / kGridDirections)];
}

int GridEnv::agent_direction(int state) const {
  const int base = random_goal() ? state / cell_count() : state;
  return base % kGridDirections;
}

GridPos GridEnv::goal_position(int state) const {
  if (random_goal()) return cells_[static_cast<std::size_t>(state % cell_count())];
  return spec_.goal;
}

bool GridEnv::is_absorbing(int state) const {
  return agent_position(state) == goal_position(state);
}

StepOutcome GridEnv::step(int state, int action) const {
  if (action < 0 || action >= kGridActionCount)
    throw std::invalid_argument("GridEnv::step: bad action");
  if (is_absorbing(state)) return {state, 0.0};
  GridState s = decode(state);
  switch (static_cast<GridAction>(action)) {
    case GridAction::TurnLeft:
      s.agent_dir = (s.agent_dir + 3) % kGridDirections;
      break;
    case GridAction::TurnRight:
      s.agent_dir = (s.agent_dir + 1) % kGridDirections;
      break;
    case GridAction::Forward: {
      const GridPos next{s.agent_pos.x + kDx[s.agent_dir], s.agent_pos.y + kDy[s.agent_dir]};
      if (!spec_.wall_at(next.x, next.y)) s.agent_pos = next;
      break;
    }
    case GridAction::Stay:
      break;
  }
  const GridPos goal = s.goal_pos.value_or(spec_.goal);
  const double reward = s.agent_pos == goal ? 1.0 : 0.0;
  return {state_index(s), reward};
}

StepOutcome GridEnv::sample_step(int state, int action, Rng&) const {
  return step(state, action);
}

int GridEnv::sample_initial(Rng& rng) const {
  GridState s;
  const GridPos goal = random_goal()
                           ? cells_[static_cast<std::size_t>(rng.uniform_int(cell_count()))]
                           : spec_.goal;
  if (spec_.start_mode == StartMode::Fixed) {
    s.agent_pos = spec_.start;
    s.agent_dir = spec_.start_dir;
  } else {
    do {
      s.agent_pos = cells_[static_cast<std::size_t>(rng.uniform_int(cell_count()))];
    } while (s.agent_pos == goal);
    s.agent_dir = rng.uniform_int(kGridDirections);
  }
  if (random_goal()) s.goal_pos = goal;
  return state_index(s);
}

Eigen::VectorXd GridEnv::initial_distribution() const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(state_count());
  std::vector<int> goals;
  if (random_goal()) {
    goals.resize(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) goals[i] = static_cast<int>(i);
  } else {
    goals = {cell_index(spec_.goal)};
  }
  for (int g : goals) {
    const double pg = 1.0 / static_cast<double>(goals.size());
    GridState s;
    if (random_goal()) s.goal_pos = cells_[static_cast<std::size_t>(g)];
    if (spec_.start_mode == StartMode::Fixed) {
      s.agent_pos = spec_.start;
      s.agent_dir = spec_.start_dir;
      p[state_index(s)] += pg;
    } else {
      const double per = pg / (static_cast<double>(cell_count() - 1) * kGridDirections);
      for (int c = 0; c < cell_count(); ++c) {
        if (c == g) continue;
        s.agent_pos = cells_[static_cast<std::size_t>(c)];
        for (int d = 0; d < kGridDirections; ++d) {
          s.agent_dir = d;
          p[state_index(s)] += per;
        }
      }
    }
  }
  return p;
}

std::vector<int> GridEnv::state_components(int state) const {
  const GridState s = decode(state);
  std::vector<int> components = {s.agent_pos.x, s.agent_pos.y, s.agent_dir};
  components.insert(components.end(), passage_components_.begin(), passage_components_.end());
  if (random_goal()) {
    components.push_back(s.goal_pos->x);
    components.push_back(s.goal_pos->y);
  }
  return components;
}

int GridEnv::state_from_components(std::span<const int> components) const {
  if (components.size() != widths_.size()) return -1;
  for (std::size_t i = 0; i < widths_.size(); ++i)
    if (components[i] < 0 || components[i] >= widths_[i]) return -1;
  const GridPos pos{components[0], components[1]};
  if (cell_index(pos) < 0) return -1;
  for (std::size_t i = 0; i < passage_components_.size(); ++i)
    if (components[3 + i] != passage_components_[i]) return -1;
  GridState s{pos, components[2], std::nullopt};
  if (random_goal()) {
    const GridPos goal{components[components.size() - 2], components[components.size() - 1]};
    if (cell_index(goal) < 0) return -1;
    s.goal_pos = goal;
  }
  return state_index(s);
}

std::unique_ptr<GridEnv> make_env(const std::string& id, std::uint64_t seed) {
  return std::make_unique<GridEnv>(make_grid_spec(id), seed);
}

TabularMdp to_tabular(const GridEnv& env, double gamma, int max_states) {
  const int n = env.state_count();
  if (n > max_states)
    throw std::invalid_argument("to_tabular: " + std::to_string(n) +
                                " states exceed the cap of " + std::to_string(max_states));
  const int a_count = env.action_count();
  std::vector<Eigen::MatrixXd> transition(
      static_cast<std::size_t>(a_count), Eigen::MatrixXd::Zero(n, n));
  Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(n, a_count);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < a_count; ++a) {
      const StepOutcome out = env.step(s, a);
      transition[static_cast<std::size_t>(a)](s, out.next_state) = 1.0;
      reward(s, a) = out.reward;
    }
  return TabularMdp(std::move(transition), std::move(reward),
                    env.initial_distribution(), gamma);
}

}  // namespace visitrl
