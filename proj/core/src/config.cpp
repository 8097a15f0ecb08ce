#include "nsstab/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "nsstab/errors.hpp"
#include "nsstab/io.hpp"

namespace nsstab {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end || !std::isfinite(x))
    throw InputError(key + ": expected a number, got '" + v + "'");
  return x;
}

long to_int(const std::string& key, const std::string& v) {
  long x = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end) throw InputError(key + ": expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"grid.nx", [](RunConfig& c, auto& k, auto& v) { c.grid.nx = int(to_int(k, v)); }},
      {"grid.ny", [](RunConfig& c, auto& k, auto& v) { c.grid.ny = int(to_int(k, v)); }},
      {"grid.lx", [](RunConfig& c, auto& k, auto& v) { c.grid.lx = to_double(k, v); }},
      {"grid.ly", [](RunConfig& c, auto& k, auto& v) { c.grid.ly = to_double(k, v); }},
      {"physics.nu", [](RunConfig& c, auto& k, auto& v) { c.nu = to_double(k, v); }},
      {"physics.force", [](RunConfig& c, auto&, auto& v) { c.force.kind = v; }},
      {"physics.force_amplitude",
       [](RunConfig& c, auto& k, auto& v) { c.force.amplitude = to_double(k, v); }},
      {"physics.force_cx", [](RunConfig& c, auto& k, auto& v) { c.force.cx = to_double(k, v); }},
      {"physics.force_cy", [](RunConfig& c, auto& k, auto& v) { c.force.cy = to_double(k, v); }},
      {"physics.force_radius",
       [](RunConfig& c, auto& k, auto& v) { c.force.radius = to_double(k, v); }},
      {"physics.sigma",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "auto") c.sigma.reset();
         else c.sigma = to_double(k, v);
       }},
      {"physics.target_unstable",
       [](RunConfig& c, auto& k, auto& v) { c.target_unstable = int(to_int(k, v)); }},
      {"physics.nu_start", [](RunConfig& c, auto& k, auto& v) { c.nu_start = to_double(k, v); }},
      {"physics.continuation_steps",
       [](RunConfig& c, auto& k, auto& v) { c.continuation_steps = int(to_int(k, v)); }},
      {"physics.newton_tol", [](RunConfig& c, auto& k, auto& v) { c.newton_tol = to_double(k, v); }},
      {"physics.newton_max_iters",
       [](RunConfig& c, auto& k, auto& v) { c.newton_max_iters = int(to_int(k, v)); }},
      {"spectrum.tau_eig", [](RunConfig& c, auto& k, auto& v) { c.tau_eig = to_double(k, v); }},
      {"norms.q", [](RunConfig& c, auto& k, auto& v) { c.norms.q = to_double(k, v); }},
      {"norms.p", [](RunConfig& c, auto& k, auto& v) { c.norms.p = to_double(k, v); }},
      {"norms.strict", [](RunConfig& c, auto& k, auto& v) { c.norms.strict = to_bool(k, v); }},
      {"omega.x0", [](RunConfig& c, auto& k, auto& v) { c.omega_x0 = to_double(k, v); }},
      {"omega.x1", [](RunConfig& c, auto& k, auto& v) { c.omega_x1 = to_double(k, v); }},
      {"omega.y0", [](RunConfig& c, auto& k, auto& v) { c.omega_y0 = to_double(k, v); }},
      {"omega.y1", [](RunConfig& c, auto& k, auto& v) { c.omega_y1 = to_double(k, v); }},
      {"omega.smoothing",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "none") c.omega_smoothing = OmegaMask::Smoothing::none;
         else if (v == "mollified") c.omega_smoothing = OmegaMask::Smoothing::mollified;
         else throw InputError(k + ": expected none or mollified");
       }},
      {"control.gamma",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "auto") c.gamma.reset();
         else c.gamma = to_double(k, v);
       }},
      {"control.epsilon", [](RunConfig& c, auto& k, auto& v) { c.epsilon = to_double(k, v); }},
      {"control.attempts", [](RunConfig& c, auto& k, auto& v) { c.attempts = int(to_int(k, v)); }},
      {"control.seed",
       [](RunConfig& c, auto& k, auto& v) { c.seed = std::uint64_t(to_int(k, v)); }},
      {"control.delta_ratio",
       [](RunConfig& c, auto& k, auto& v) { c.delta_ratio = to_double(k, v); }},
      {"control.K", [](RunConfig& c, auto& k, auto& v) { c.K = int(to_int(k, v)); }},
      {"control.tau_rank", [](RunConfig& c, auto& k, auto& v) { c.tau_rank = to_double(k, v); }},
      {"sim.dt", [](RunConfig& c, auto& k, auto& v) { c.sim.dt = to_double(k, v); }},
      {"sim.t_final", [](RunConfig& c, auto& k, auto& v) { c.sim.t_final = to_double(k, v); }},
      {"sim.record_every",
       [](RunConfig& c, auto& k, auto& v) { c.sim.record_every = int(to_int(k, v)); }},
      {"sim.ic", [](RunConfig& c, auto&, auto& v) { c.sim.ic.kind = v; }},
      {"sim.ic_amplitude",
       [](RunConfig& c, auto& k, auto& v) { c.sim.ic.amplitude = to_double(k, v); }},
      {"sim.ic_seed",
       [](RunConfig& c, auto& k, auto& v) { c.sim.ic.seed = std::uint64_t(to_int(k, v)); }},
      {"sim.besov", [](RunConfig& c, auto& k, auto& v) { c.sim.besov = to_bool(k, v); }},
      {"sim.pressure", [](RunConfig& c, auto& k, auto& v) { c.sim.pressure = to_bool(k, v); }},
      {"sim.blowup_factor",
       [](RunConfig& c, auto& k, auto& v) { c.sim.blowup_factor = to_double(k, v); }},
      {"sim.p_time", [](RunConfig& c, auto& k, auto& v) { c.sim.p_time = to_double(k, v); }},
      {"sweep.amplitudes",
       [](RunConfig& c, auto& k, auto& v) { c.sweep_amplitudes = to_list(k, v); }},
      {"sweep.gammas", [](RunConfig& c, auto& k, auto& v) { c.sweep_gammas = to_list(k, v); }},
      {"output.dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    if (const auto hash = raw.find(" #"); hash != std::string::npos) raw.resize(hash);
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (value.empty()) throw InputError(key + ": empty value");
    it->second(c, key, value);
  }
  c.sim.norms = c.norms;
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw InputError("config file not found: " + path.string());
  return parse(io::read_text(path));
}

void RunConfig::validate() const {
  if (grid.nx < 8 || grid.ny < 8) throw InputError("grid.nx and grid.ny must be >= 8");
  if (!(grid.lx > 0) || !(grid.ly > 0)) throw InputError("grid.lx and grid.ly must be positive");
  if (!(nu > 0)) throw InputError("physics.nu must be positive");
  if (sigma && *sigma < 0) throw InputError("physics.sigma must be >= 0 or auto");
  if (target_unstable < 1) throw InputError("physics.target_unstable must be >= 1");
  if (continuation_steps < 1) throw InputError("physics.continuation_steps must be >= 1");
  if (nu_start != 0.0 && nu_start < nu)
    throw InputError("physics.nu_start must be 0 or >= physics.nu");
  if (!(newton_tol > 0)) throw InputError("physics.newton_tol must be positive");
  if (newton_max_iters < 1) throw InputError("physics.newton_max_iters must be >= 1");
  if (!(tau_eig > 0)) throw InputError("spectrum.tau_eig must be positive");
  norms.validate();
  if (!(0 < omega_x0 && omega_x0 < omega_x1 && omega_x1 < grid.lx))
    throw InputError("omega x-range must satisfy 0 < x0 < x1 < grid.lx");
  if (!(0 < omega_y0 && omega_y0 < omega_y1 && omega_y1 < grid.ly))
    throw InputError("omega y-range must satisfy 0 < y0 < y1 < grid.ly");
  if (gamma && !(*gamma > 0)) throw InputError("control.gamma must be positive or auto");
  if (!(epsilon > 0)) throw InputError("control.epsilon must be positive");
  if (attempts < 1) throw InputError("control.attempts must be >= 1");
  if (!(delta_ratio > 0)) throw InputError("control.delta_ratio must be positive");
  if (K < 0) throw InputError("control.K must be >= 0");
  if (!(tau_rank > 0)) throw InputError("control.tau_rank must be positive");
  sim.validate();
  for (double g : sweep_gammas)
    if (!(g > 0)) throw InputError("sweep.gammas entries must be positive");
  for (double a : sweep_amplitudes)
    if (!(a >= 0)) throw InputError("sweep.amplitudes entries must be >= 0");
  (void)make_force(Grid(8, 8, grid.lx, grid.ly), force);  // rejects unknown kinds
}

OmegaMask RunConfig::mask() const {
  OmegaMask box = OmegaMask::rectangle(grid, omega_x0, omega_x1, omega_y0, omega_y1);
  if (box.count() == 0) throw InputError("omega rectangle contains no cell center");
  if (omega_smoothing == OmegaMask::Smoothing::none) return box;
  return OmegaMask(grid, box.cells(), omega_smoothing);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["grid"] = {{"nx", grid.nx}, {"ny", grid.ny}, {"lx", grid.lx}, {"ly", grid.ly}};
  j["physics"] = {{"nu", nu},
                  {"force", force.to_json()},
                  {"sigma", sigma ? nlohmann::json(*sigma) : nlohmann::json("auto")},
                  {"target_unstable", target_unstable},
                  {"nu_start", nu_start},
                  {"continuation_steps", continuation_steps},
                  {"newton_tol", newton_tol},
                  {"newton_max_iters", newton_max_iters}};
  j["spectrum"] = {{"tau_eig", tau_eig}};
  j["norms"] = {{"q", norms.q}, {"p", norms.p}, {"strict", norms.strict}};
  j["omega"] = {{"x0", omega_x0},
                {"x1", omega_x1},
                {"y0", omega_y0},
                {"y1", omega_y1},
                {"smoothing", omega_smoothing == OmegaMask::Smoothing::none ? "none" : "mollified"}};
  j["control"] = {{"gamma", gamma ? nlohmann::json(*gamma) : nlohmann::json("auto")},
                  {"epsilon", epsilon},
                  {"attempts", attempts},
                  {"seed", seed},
                  {"delta_ratio", delta_ratio},
                  {"K", K},
                  {"tau_rank", tau_rank}};
  j["sim"] = sim.to_json();
  j["sim"]["besov"] = sim.besov;
  j["sim"]["pressure"] = sim.pressure;
  j["sweep"] = {{"amplitudes", sweep_amplitudes}, {"gammas", sweep_gammas}};
  return j;
}

}  // namespace nsstab
