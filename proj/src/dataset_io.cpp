#include "dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"

namespace ctmsm {

using nlohmann::json;

namespace {

std::string num17(double v) {
  require(std::isfinite(v), ErrorKind::Input, "cannot serialize a non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string record_line(const Trajectory& t) {
  std::string r = "{\"id\":" + std::to_string(t.id) + ",\"z\":[";
  for (std::size_t k = 0; k < t.z.size(); ++k) r += (k ? "," : "") + num17(t.z[k]);
  r += "],\"u\":";
  r += t.u ? std::to_string(*t.u) : std::string("null");
  r += ",\"t_max\":" + num17(t.t_max) + ",\"terminated\":" + std::to_string(t.terminated);
  r += ",\"y\":" + num17(t.y) + ",\"a_jumps\":[";
  const auto& jumps = t.a_path.jumps();
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    r += (k ? ",[" : "[") + num17(jumps[k].time) + "," + num17(jumps[k].dose) + "]";
  }
  r += "],\"l_obs\":[";
  const auto& g = t.l_path.grid();
  const auto& v = t.l_path.values();
  for (std::size_t k = 0; k < g.size() && k < v.size(); ++k) {
    r += (k ? ",[" : "[") + num17(g[k]) + "," + num17(v[k]) + "]";
  }
  r += "]}";
  return r;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
  fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + msg);
}

double number(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) parse_fail(line, std::string("missing \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number()) parse_fail(line, std::string("\"") + key + "\" must be a number");
  return v.get<double>();
}

std::vector<std::pair<double, double>> pairs(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) parse_fail(line, std::string("missing \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_array()) parse_fail(line, std::string("\"") + key + "\" must be an array of [t, value] pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      parse_fail(line, std::string("\"") + key + "\" must be an array of [t, value] pairs");
    }
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

Trajectory record_from_json(const json& j, std::size_t line) {
  static const char* kKeys[] = {"id", "z", "u", "t_max", "terminated", "y", "a_jumps", "l_obs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return it.key() == k; }) ==
        std::end(kKeys)) {
      parse_fail(line, "unknown key \"" + it.key() + "\"");
    }
  }
  Trajectory t;
  if (!j.contains("id") || !j.at("id").is_number_integer()) parse_fail(line, "\"id\" must be an integer");
  t.id = j.at("id").get<std::int64_t>();
  if (!j.contains("z") || !j.at("z").is_array()) parse_fail(line, "\"z\" must be an array of numbers");
  for (const auto& e : j.at("z")) {
    if (!e.is_number()) parse_fail(line, "\"z\" must be an array of numbers");
    t.z.push_back(e.get<double>());
  }
  if (j.contains("u") && !j.at("u").is_null()) {
    const auto& u = j.at("u");
    if (!u.is_number_integer() || (u.get<int>() != 0 && u.get<int>() != 1)) {
      parse_fail(line, "\"u\" must be 0, 1 or null");
    }
    t.u = u.get<int>();
  }
  t.t_max = number(j, "t_max", line);
  if (!j.contains("terminated") || !j.at("terminated").is_number_integer()) {
    parse_fail(line, "\"terminated\" must be 0 or 1");
  }
  t.terminated = j.at("terminated").get<int>();
  t.y = number(j, "y", line);
  std::vector<DoseJump> jumps;
  for (auto [time, dose] : pairs(j, "a_jumps", line)) jumps.push_back({time, dose});
  t.a_path = TreatmentPath(std::move(jumps), t.t_max);
  std::vector<double> grid, values;
  for (auto [time, l] : pairs(j, "l_obs", line)) {
    grid.push_back(time);
    values.push_back(l);
  }
  t.l_path = CovariatePath(std::move(grid), std::move(values));
  return t;
}

}  // namespace

std::string dataset_to_jsonl(const std::vector<Trajectory>& data, std::optional<double> t_R,
                             const std::string& world) {
  std::string out;
  if (t_R || !world.empty()) {
    out += "{\"ctmsm_dataset\":1";
    if (t_R) out += ",\"t_R\":" + num17(*t_R);
    if (!world.empty()) out += ",\"world\":" + json(world).dump();
    out += "}\n";
  }
  for (const auto& t : data) out += record_line(t) + "\n";
  return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      parse_fail(n, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) parse_fail(n, "expected a JSON object");
    if (first && j.contains("ctmsm_dataset")) {
      first = false;
      if (j.contains("t_R")) {
        if (!j.at("t_R").is_number()) parse_fail(n, "\"t_R\" must be a number");
        ds.t_R = j.at("t_R").get<double>();
      }
      if (j.contains("world")) {
        if (!j.at("world").is_string()) parse_fail(n, "\"world\" must be a string");
        ds.world = j.at("world").get<std::string>();
      }
      continue;
    }
    first = false;
    ds.subjects.push_back(record_from_json(j, n));
  }
  return ds;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + target.parent_path().string());
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) fail(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot move output into place at " + path);
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset(const std::string& path, const std::vector<Trajectory>& data, std::optional<double> t_R,
                   const std::string& world) {
  write_text_atomic(path, dataset_to_jsonl(data, t_R, world));
}

Dataset read_dataset(const std::string& path, std::optional<double> t_R) {
  Dataset ds = dataset_from_jsonl(read_text(path));
  if (ds.subjects.empty()) fail(ErrorKind::Validation, path + ": no subject records");
  if (t_R) ds.t_R = t_R;
  if (!ds.t_R) {
    double m = 0.0;
    for (const auto& t : ds.subjects) m = std::max(m, t.t_max);
    ds.t_R = m;
  }
  const auto issues = validate_dataset(ds.subjects, *ds.t_R);
  if (!issues.empty()) {
    std::string msg = path + ": " + std::to_string(issues.size()) + " violation(s)";
    const std::size_t shown = std::min<std::size_t>(issues.size(), 20);
    for (std::size_t k = 0; k < shown; ++k) msg += "\n  " + issues[k];
    if (shown < issues.size()) msg += "\n  ...";
    fail(ErrorKind::Validation, msg);
  }
  return ds;
}

}  // namespace ctmsm
