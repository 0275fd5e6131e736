#include "pinn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pinn/errors.hpp"

namespace pinn::config {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Context {
  const std::string& path;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(path + ":" + std::to_string(line) + ": " + message);
  }
};

double parse_double(const Context& ctx, const std::string& value) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') ctx.fail("expected a number, got '" + value + "'");
  return v;
}

std::uint64_t parse_count(const Context& ctx, const std::string& value) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || value[0] == '-') {
    ctx.fail("expected a nonnegative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const Context& ctx, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  ctx.fail("expected a boolean, got '" + value + "'");
}

std::vector<double> parse_double_list(const Context& ctx, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) ctx.fail("empty entry in list '" + value + "'");
    out.push_back(parse_double(ctx, item));
  }
  if (out.empty()) ctx.fail("expected a comma-separated list");
  return out;
}

std::vector<std::size_t> parse_count_list(const Context& ctx, const std::string& value) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(ctx, value)) {
    if (v < 1 || v != std::floor(v)) ctx.fail("expected positive integers in '" + value + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");

  RunConfig cfg;
  Context ctx{path};
  std::string section;
  std::set<std::string> seen;  // "section.key" for required-key checks
  std::string line;

  while (std::getline(in, line)) {
    ++ctx.line;
    auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "problem" && section != "network" && section != "training") {
        ctx.fail("unknown section [" + section + "]");
      }
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) ctx.fail("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) ctx.fail("empty key");
    if (value.empty()) ctx.fail("empty value for key '" + key + "'");
    if (section.empty()) ctx.fail("key '" + key + "' outside any section");
    seen.insert(section + "." + key);

    try {
      if (section == "problem") {
        auto& p = cfg.problem;
        if (key == "name") p.name = value;
        else if (key == "geometry") p.geometry_path = value;
        else if (key == "E") p.E = parse_double(ctx, value);
        else if (key == "nu") p.nu = parse_double(ctx, value);
        else if (key == "lambda_boundary") {
          p.lambda_boundary = parse_double(ctx, value);
          p.lambda_diffusion_boundary = p.lambda_boundary;
        }
        else if (key == "lambda_initial") p.lambda_initial = parse_double(ctx, value);
        else if (key == "split_residual_squares") p.split_residual_squares = parse_bool(ctx, value);
        else if (key == "plate_width") p.plate_width = parse_double(ctx, value);
        else if (key == "plate_height") p.plate_height = parse_double(ctx, value);
        else if (key == "hole_radius") p.hole_radius = parse_double(ctx, value);
        else if (key == "length_scale") p.length_scale = parse_double(ctx, value);
        else if (key == "displacement_scale") p.displacement_scale = parse_double(ctx, value);
        else if (key == "poisson") p.poisson_planestress = parse_double(ctx, value);
        else if (key == "term_lambdas") {
          auto vals = parse_double_list(ctx, value);
          if (vals.size() != p.term_lambdas.size()) {
            ctx.fail("term_lambdas needs exactly " + std::to_string(p.term_lambdas.size()) +
                     " entries");
          }
          std::copy(vals.begin(), vals.end(), p.term_lambdas.begin());
        }
        else ctx.fail("unknown key '" + key + "' in [problem]");
      } else if (section == "network") {
        auto& n = cfg.problem.net;
        if (key == "hidden") n.hidden = parse_count_list(ctx, value);
        else if (key == "activation") n.activation = nn::activation_from_string(value);
        else if (key == "init_seed") n.init_seed = parse_count(ctx, value);
        else ctx.fail("unknown key '" + key + "' in [network]");
      } else {
        auto& s = cfg.sampling;
        auto& t = cfg.training;
        if (key == "n_collocation") s.n_collocation = parse_count(ctx, value);
        else if (key == "n_boundary") s.n_boundary = parse_count(ctx, value);
        else if (key == "n_seeds") s.n_seeds = parse_count(ctx, value);
        else if (key == "interior_generator") s.interior_generator = geom::generator_from_string(value);
        else if (key == "boundary_generator") s.boundary_generator = geom::generator_from_string(value);
        else if (key == "halton_scramble") s.halton_scramble = parse_count(ctx, value);
        else if (key == "rng_seed") { s.rng_seed = parse_count(ctx, value); t.rng_seed = s.rng_seed; }
        else if (key == "batch") t.batch = parse_count(ctx, value);
        else if (key == "learning_rate") t.learning_rate = parse_double(ctx, value);
        else if (key == "max_iterations") t.max_iterations = parse_count(ctx, value);
        else if (key == "tolerance") t.tolerance = parse_double(ctx, value);
        else if (key == "mode") t.mode = importance::mode_from_string(value);
        else if (key == "adam_eps") t.adam_eps = parse_double(ctx, value);
        else if (key == "threads") t.threads = parse_count(ctx, value);
        else if (key == "n_eval") cfg.n_eval = parse_count(ctx, value);
        else ctx.fail("unknown key '" + key + "' in [training]");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      ctx.fail(e.what());  // enum parse errors gain file/line context
    }
  }

  auto required = [&](const char* section_name, const char* key) {
    if (!seen.count(std::string(section_name) + "." + key)) {
      throw ConfigError(path + ": missing required key '" + key + "' in [" + section_name + "]");
    }
  };
  required("problem", "name");
  required("network", "hidden");
  required("network", "activation");
  required("training", "n_collocation");
  required("training", "n_seeds");
  required("training", "batch");
  required("training", "learning_rate");
  required("training", "max_iterations");
  required("training", "mode");
  if (cfg.problem.name == "elasticity") required("problem", "geometry");

  if (!cfg.problem.geometry_path.empty()) {
    std::filesystem::path geo(cfg.problem.geometry_path);
    if (geo.is_relative()) geo = std::filesystem::path(path).parent_path() / geo;
    cfg.problem.geometry_path = std::filesystem::absolute(geo).lexically_normal().string();
  }
  return cfg;
}

}  // namespace pinn::config
