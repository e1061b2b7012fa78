#include "event_paths.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace ctmsm {

double TreatmentPath::dose_at(double t) const {
  require(t >= 0.0, ErrorKind::Domain, "dose_at: negative time");
  if (t > end_time_) return 0.0;
  auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t,
                             [](double v, const DoseJump& j) { return v < j.time; });
  if (it == jumps_.begin()) return 0.0;
  return std::prev(it)->dose;
}

double TreatmentPath::dose_left_limit(double t) const {
  require(t > 0.0, ErrorKind::Domain, "dose_left_limit: time must be > 0");
  if (t > end_time_) return 0.0;
  auto it = std::lower_bound(jumps_.begin(), jumps_.end(), t,
                             [](const DoseJump& j, double v) { return j.time < v; });
  if (it == jumps_.begin()) return 0.0;
  return std::prev(it)->dose;
}

std::vector<Segment> TreatmentPath::segments(double upto) const {
  require(upto > 0.0 && upto <= end_time_, ErrorKind::Domain,
          "segments: upto must lie in (0, end_time]");
  std::vector<Segment> out;
  out.reserve(jumps_.size() + 1);
  double start = 0.0;
  double dose = 0.0;
  for (const auto& j : jumps_) {
    if (j.time >= upto) {
      if (j.time == upto) {
        out.push_back({start, upto, dose});
        start = upto;
        dose = j.dose;
      }
      break;
    }
    out.push_back({start, j.time, dose});
    start = j.time;
    dose = j.dose;
  }
  out.push_back({start, upto, dose});
  return out;
}

double CovariatePath::value_at(double t) const {
  if (grid_.empty()) return 0.0;
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  if (it == grid_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(std::distance(grid_.begin(), it)) - 1];
}

double CovariatePath::value_left_limit(double t) const {
  if (grid_.empty()) return 0.0;
  auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
  if (it == grid_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(std::distance(grid_.begin(), it)) - 1];
}

namespace {

bool finite_all(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::vector<std::string> validate(const Trajectory& tr, double t_R) {
  std::vector<std::string> out;
  const auto& jumps = tr.a_path.jumps();

  if (!std::isfinite(tr.t_max) || !(tr.t_max > 0.0) || tr.t_max > t_R + kTimeTolerance) {
    out.push_back("t_max in (0, t_R]");
  }
  if (std::abs(tr.a_path.end_time() - tr.t_max) > kTimeTolerance) {
    out.push_back("treatment end_time equals t_max");
  }
  if (tr.terminated != 0 && tr.terminated != 1) {
    out.push_back("terminated flag in {0, 1}");
  } else if (tr.terminated == 0 && std::abs(tr.t_max - t_R) > kTimeTolerance) {
    out.push_back("censored subject has t_max == t_R");
  }
  if (tr.u && *tr.u != 0 && *tr.u != 1) out.push_back("u in {0, 1}");
  if (!std::isfinite(tr.y)) out.push_back("y is finite");
  if (!finite_all(tr.z)) out.push_back("z is finite");

  bool in_range = true;
  bool increasing = true;
  bool changes = true;
  bool finite_doses = true;
  double prev_time = 0.0;
  double prev_dose = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    const auto& j = jumps[k];
    if (!std::isfinite(j.time) || !(j.time > 0.0) || j.time > tr.a_path.end_time() + kTimeTolerance) {
      in_range = false;
    }
    if (k > 0 && !(j.time > prev_time)) increasing = false;
    if (!std::isfinite(j.dose)) finite_doses = false;
    if (j.dose == prev_dose) changes = false;
    prev_time = j.time;
    prev_dose = j.dose;
  }
  if (!in_range) out.push_back("jump times in (0, end]");
  if (!increasing) out.push_back("jump times strictly increasing");
  if (!changes) out.push_back("consecutive doses differ");
  if (!finite_doses) out.push_back("doses are finite");

  const auto& grid = tr.l_path.grid();
  const auto& values = tr.l_path.values();
  if (grid.empty()) {
    out.push_back("covariate grid is nonempty");
  } else {
    if (grid.size() != values.size()) out.push_back("covariate grid and values have equal length");
    if (grid.front() != 0.0) out.push_back("covariate grid starts at 0");
    bool grid_increasing = true;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      if (!(grid[k] > grid[k - 1])) grid_increasing = false;
    }
    if (!grid_increasing) out.push_back("covariate grid strictly increasing");
    if (grid.back() > tr.t_max + kTimeTolerance) out.push_back("covariate grid within [0, t_max]");
    if (!finite_all(values) || !finite_all(grid)) out.push_back("covariate values are finite");
  }
  return out;
}

std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> out;
  if (c.n < 1) out.push_back("n >= 1");
  if (!(c.t_R > 0.0)) out.push_back("t_R > 0");
  if (!(c.dt > 0.0)) out.push_back("dt > 0");
  if (!(c.delta_L > 0.0)) out.push_back("delta_L > 0");
  if (c.p_Z < 1) out.push_back("p_Z >= 1");
  if (c.dt > 0.0 && c.delta_L > 0.0 && c.t_R > 0.0) {
    if (c.dt > c.delta_L) out.push_back("dt <= delta_L");
    auto divides = [&](double whole) {
      double k = std::round(whole / c.dt);
      return k >= 1.0 && std::abs(k * c.dt - whole) <= kTimeTolerance;
    };
    if (!divides(c.t_R)) out.push_back("dt divides t_R");
    if (!divides(c.delta_L)) out.push_back("dt divides delta_L");
  }
  for (auto& m : check_params(c.obs_params, c.p_Z)) out.push_back(m);
  for (auto& m : check_params(c.exp_params)) out.push_back(m);
  return out;
}

std::vector<std::string> validate_dataset(const std::vector<Trajectory>& data, double t_R) {
  std::vector<std::string> out;
  std::set<std::int64_t> ids;
  std::size_t p_z = data.empty() ? 0 : data.front().z.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& tr = data[i];
    for (auto& m : validate(tr, t_R)) {
      std::ostringstream os;
      os << "record " << i << " (id " << tr.id << "): " << m;
      out.push_back(os.str());
    }
    if (!ids.insert(tr.id).second) {
      out.push_back("record " + std::to_string(i) + ": duplicate id " + std::to_string(tr.id));
    }
    if (tr.z.size() != p_z) {
      out.push_back("record " + std::to_string(i) + ": z length differs from the first record");
    }
  }
  return out;
}

}  // namespace ctmsm
