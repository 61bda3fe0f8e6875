#include "contjump/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "contjump/errors.hpp"

namespace contjump {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigurationError(path + ": " + what);
}

void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(path, "expected a mapping");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

template <class T>
T read(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(path, "ill-typed value");
  }
}

template <class T>
void read_opt(const YAML::Node& parent, const std::string& path, const std::string& key, T& out) {
  if (auto n = parent[key]) out = read<T>(n, join(path, key));
}

Vec read_vec(const YAML::Node& node, const std::string& path, int dim) {
  if (!node.IsSequence() || static_cast<int>(node.size()) != dim)
    fail(path, "expected a list of " + std::to_string(dim) + " numbers");
  Vec v{};
  for (int i = 0; i < dim; ++i) v[i] = read<double>(node[i], path + "[" + std::to_string(i) + "]");
  return v;
}

std::vector<double> read_list(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(path, "expected a list");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(read<double>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

RadialProfile read_radial(const YAML::Node& node, const std::string& path, RadialProfile fallback) {
  check_keys(node, path, {"shape", "radius", "height"});
  RadialProfile p = fallback;
  if (auto s = node["shape"]) {
    auto name = read<std::string>(s, join(path, "shape"));
    if (name == "uniform_ball") p.shape = ProfileShape::UniformBall;
    else if (name == "smooth_bump") p.shape = ProfileShape::SmoothBump;
    else fail(join(path, "shape"), "expected uniform_ball or smooth_bump");
  }
  read_opt(node, path, "radius", p.radius);
  read_opt(node, path, "height", p.height);
  try {
    p.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return p;
}

TestProfile read_profile(const YAML::Node& node, const std::string& path, int dim) {
  check_keys(node, path, {"center", "radius", "amplitude"});
  TestProfile p;
  if (!node["center"]) fail(join(path, "center"), "missing field");
  p.center = read_vec(node["center"], join(path, "center"), dim);
  read_opt(node, path, "radius", p.radius);
  read_opt(node, path, "amplitude", p.amplitude);
  return p;
}

Observable read_observable(const YAML::Node& node, const std::string& path, int dim) {
  check_keys(node, path, {"exponential", "profiles", "polynomial", "tanh", "gaussian"});
  if (auto e = node["exponential"]) {
    if (node.size() != 1) fail(path, "exponential excludes other keys");
    return ExponentialFunction{read_profile(e, join(path, "exponential"), dim)};
  }
  auto pr = node["profiles"];
  if (!pr || !pr.IsSequence() || pr.size() == 0) fail(join(path, "profiles"), "expected a nonempty list");
  CylinderFunction f;
  for (std::size_t i = 0; i < pr.size(); ++i)
    f.profiles.push_back(read_profile(pr[i], join(path, "profiles") + "[" + std::to_string(i) + "]", dim));
  int outers = (node["polynomial"] ? 1 : 0) + (node["tanh"] ? 1 : 0) + (node["gaussian"] ? 1 : 0);
  if (outers != 1) fail(path, "exactly one of polynomial, tanh, gaussian is required");
  if (auto n = node["polynomial"]) {
    std::string p = join(path, "polynomial");
    check_keys(n, p, {"constant", "linear", "quadratic", "cubic"});
    PolynomialOuter g;
    read_opt(n, p, "constant", g.constant);
    if (n["linear"]) g.linear = read_list(n["linear"], join(p, "linear"));
    if (n["quadratic"]) g.quadratic = read_list(n["quadratic"], join(p, "quadratic"));
    if (n["cubic"]) g.cubic = read_list(n["cubic"], join(p, "cubic"));
    f.outer = g;
  } else if (auto n = node["tanh"]) {
    std::string p = join(path, "tanh");
    check_keys(n, p, {"scale", "slope", "shift"});
    TanhProductOuter g;
    read_opt(n, p, "scale", g.scale);
    if (n["slope"]) g.slope = read_list(n["slope"], join(p, "slope"));
    if (n["shift"]) g.shift = read_list(n["shift"], join(p, "shift"));
    f.outer = g;
  } else {
    auto gn = node["gaussian"];
    std::string p = join(path, "gaussian");
    check_keys(gn, p, {"scale", "center", "width"});
    GaussianOuter g;
    read_opt(gn, p, "scale", g.scale);
    if (gn["center"]) g.center = read_list(gn["center"], join(p, "center"));
    read_opt(gn, p, "width", g.width);
    f.outer = g;
  }
  return Observable(f);
}

void read_experiment(const YAML::Node& node, ExperimentParams& x) {
  const std::string path = "experiment";
  check_keys(node, path,
             {"samples", "replicas", "eps_diffusive", "eps_bd", "horizon", "bins", "r_max", "diffusion_dt",
              "record_every", "gap_replicas", "gap_horizon", "gap_dt", "fock_sites", "fock_side", "fock_n_max"});
  read_opt(node, path, "samples", x.samples);
  read_opt(node, path, "replicas", x.replicas);
  if (node["eps_diffusive"]) x.eps_diffusive = read_list(node["eps_diffusive"], join(path, "eps_diffusive"));
  if (node["eps_bd"]) x.eps_bd = read_list(node["eps_bd"], join(path, "eps_bd"));
  read_opt(node, path, "horizon", x.horizon);
  read_opt(node, path, "bins", x.bins);
  read_opt(node, path, "r_max", x.r_max);
  read_opt(node, path, "diffusion_dt", x.diffusion_dt);
  read_opt(node, path, "record_every", x.record_every);
  read_opt(node, path, "gap_replicas", x.gap_replicas);
  read_opt(node, path, "gap_horizon", x.gap_horizon);
  read_opt(node, path, "gap_dt", x.gap_dt);
  read_opt(node, path, "fock_sites", x.fock_sites);
  read_opt(node, path, "fock_side", x.fock_side);
  read_opt(node, path, "fock_n_max", x.fock_n_max);
}

void emit_vec(YAML::Emitter& out, const Vec& v, int dim) {
  out << YAML::Flow << YAML::BeginSeq;
  for (int i = 0; i < dim; ++i) out << v[i];
  out << YAML::EndSeq;
}

void emit_list(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

void emit_profile(YAML::Emitter& out, const TestProfile& p, int dim) {
  out << YAML::BeginMap << YAML::Key << "center" << YAML::Value;
  emit_vec(out, p.center, dim);
  out << YAML::Key << "radius" << YAML::Value << p.radius << YAML::Key << "amplitude" << YAML::Value << p.amplitude
      << YAML::EndMap;
}

void emit_radial(YAML::Emitter& out, const RadialProfile& p) {
  out << YAML::BeginMap << YAML::Key << "shape" << YAML::Value
      << (p.shape == ProfileShape::UniformBall ? "uniform_ball" : "smooth_bump") << YAML::Key << "radius"
      << YAML::Value << p.radius << YAML::Key << "height" << YAML::Value << p.height << YAML::EndMap;
}

void emit_observable(YAML::Emitter& out, const Observable& obs, int dim) {
  out << YAML::BeginMap;
  if (obs.is_exponential()) {
    out << YAML::Key << "exponential" << YAML::Value;
    emit_profile(out, obs.exponential_profile(), dim);
    out << YAML::EndMap;
    return;
  }
  out << YAML::Key << "profiles" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : obs.profiles()) emit_profile(out, p, dim);
  out << YAML::EndSeq;
  std::visit(
      [&](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, PolynomialOuter>) {
          out << YAML::Key << "polynomial" << YAML::Value << YAML::BeginMap << YAML::Key << "constant" << YAML::Value
              << g.constant << YAML::Key << "linear" << YAML::Value;
          emit_list(out, g.linear);
          out << YAML::Key << "quadratic" << YAML::Value;
          emit_list(out, g.quadratic);
          out << YAML::Key << "cubic" << YAML::Value;
          emit_list(out, g.cubic);
          out << YAML::EndMap;
        } else if constexpr (std::is_same_v<G, TanhProductOuter>) {
          out << YAML::Key << "tanh" << YAML::Value << YAML::BeginMap << YAML::Key << "scale" << YAML::Value
              << g.scale << YAML::Key << "slope" << YAML::Value;
          emit_list(out, g.slope);
          out << YAML::Key << "shift" << YAML::Value;
          emit_list(out, g.shift);
          out << YAML::EndMap;
        } else {
          out << YAML::Key << "gaussian" << YAML::Value << YAML::BeginMap << YAML::Key << "scale" << YAML::Value
              << g.scale << YAML::Key << "center" << YAML::Value;
          emit_list(out, g.center);
          out << YAML::Key << "width" << YAML::Value << g.width << YAML::EndMap;
        }
      },
      obs.outer_function());
  out << YAML::EndMap;
}

}  // namespace

std::string variant_name(KernelVariant v) {
  return v == KernelVariant::Factorized ? "factorized" : "momentum";
}

std::string mutation_name(Mutation m) {
  switch (m) {
    case Mutation::None: return "none";
    case Mutation::OddB: return "odd_b";
    case Mutation::DriftA: return "drift_a";
    case Mutation::PreJumpOnly: return "pre_jump_only";
    case Mutation::SquaredAcceptance: return "squared_acceptance";
  }
  return "none";
}

TorusGeometry RunConfig::geometry() const { return TorusGeometry(dim, side); }

KernelSpec RunConfig::kernel() const { return KernelSpec(variant, a, b, dim, mutation, jump_nodes); }

void RunConfig::validate() const {
  if (dim < 1 || dim > 3) throw ConfigurationError("geometry.dim: must be 1, 2 or 3");
  if (!(side > 0.0) || !std::isfinite(side)) throw ConfigurationError("geometry.side: must be positive");
  if (!(z >= 0.0) || !std::isfinite(z)) throw ConfigurationError("intensity: must be nonnegative");
  if (jump_nodes < 0) throw ConfigurationError("kernel.jump_nodes: must be nonnegative");
  double need = 2.0 * (b.radius + 2.0 * a.radius);
  if (!(side > need)) {
    std::ostringstream os;
    os << "geometry.side: L = " << side << " violates L > 2 (r_b + 2 r_a) = " << need;
    throw ConfigurationError(os.str());
  }
  if (threads < 0) throw ConfigurationError("threads: must be nonnegative");
  TorusGeometry geom = geometry();
  for (std::size_t i = 0; i < observables.size(); ++i) {
    try {
      observables[i].validate(geom);
    } catch (const std::exception& e) {
      throw ConfigurationError("observables[" + std::to_string(i) + "]: " + e.what());
    }
  }
  try {
    phi.validate(geom);
  } catch (const std::exception& e) {
    throw ConfigurationError(std::string("phi: ") + e.what());
  }
  const auto& x = experiment;
  if (x.samples == 0) throw ConfigurationError("experiment.samples: must be positive");
  if (x.bins == 0) throw ConfigurationError("experiment.bins: must be positive");
  if (!(x.gap_dt > 0.0) || !(x.gap_horizon > x.gap_dt))
    throw ConfigurationError("experiment.gap_dt: need 0 < gap_dt < gap_horizon");
  if (!(x.diffusion_dt > 0.0)) throw ConfigurationError("experiment.diffusion_dt: must be positive");
  if (x.fock_sites < 1 || x.fock_n_max < 1 || !(x.fock_side > 0.0))
    throw ConfigurationError("experiment.fock_*: sites, n_max and side must be positive");
  for (double e : x.eps_diffusive)
    if (!(e > 0.0)) throw ConfigurationError("experiment.eps_diffusive: entries must be positive");
  for (double e : x.eps_bd)
    if (!(e > 0.0)) throw ConfigurationError("experiment.eps_bd: entries must be positive");
}

RunConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigurationError(std::string("malformed YAML: ") + e.what());
  }
  RunConfig c;
  if (root.IsNull()) {
    c.validate();
    return c;
  }
  check_keys(root, "", {"geometry", "kernel", "intensity", "seed", "threads", "observables", "phi", "experiment"});
  if (auto g = root["geometry"]) {
    check_keys(g, "geometry", {"dim", "side"});
    read_opt(g, "geometry", "dim", c.dim);
    read_opt(g, "geometry", "side", c.side);
  }
  if (c.dim < 1 || c.dim > 3) fail("geometry.dim", "must be 1, 2 or 3");
  if (auto k = root["kernel"]) {
    check_keys(k, "kernel", {"variant", "a", "b", "mutation", "jump_nodes"});
    if (auto v = k["variant"]) {
      auto name = read<std::string>(v, "kernel.variant");
      if (name == "factorized") c.variant = KernelVariant::Factorized;
      else if (name == "momentum") c.variant = KernelVariant::MomentumConserving;
      else fail("kernel.variant", "expected factorized or momentum");
    }
    if (k["a"]) c.a = read_radial(k["a"], "kernel.a", c.a);
    if (k["b"]) c.b = read_radial(k["b"], "kernel.b", c.b);
    if (auto m = k["mutation"]) {
      auto name = read<std::string>(m, "kernel.mutation");
      bool found = false;
      for (auto cand : {Mutation::None, Mutation::OddB, Mutation::DriftA, Mutation::PreJumpOnly,
                        Mutation::SquaredAcceptance})
        if (mutation_name(cand) == name) {
          c.mutation = cand;
          found = true;
        }
      if (!found) fail("kernel.mutation", "unknown mutation '" + name + "'");
    }
    read_opt(k, "kernel", "jump_nodes", c.jump_nodes);
  }
  if (auto z = root["intensity"]) c.z = read<double>(z, "intensity");
  if (c.z < 0.0) fail("intensity", "range error, must be nonnegative");
  if (auto s = root["seed"]) c.seed = read<std::uint64_t>(s, "seed");
  read_opt(root, "", "threads", c.threads);
  if (auto p = root["phi"]) c.phi = read_profile(p, "phi", c.dim);
  if (auto o = root["observables"]) {
    if (!o.IsSequence()) fail("observables", "expected a list");
    for (std::size_t i = 0; i < o.size(); ++i)
      c.observables.push_back(read_observable(o[i], "observables[" + std::to_string(i) + "]", c.dim));
  }
  if (auto x = root["experiment"]) read_experiment(x, c.experiment);
  c.validate();
  return c;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string to_yaml(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap << YAML::Key << "dim" << YAML::Value << c.dim
      << YAML::Key << "side" << YAML::Value << c.side << YAML::EndMap;
  out << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap << YAML::Key << "variant" << YAML::Value
      << variant_name(c.variant) << YAML::Key << "a" << YAML::Value;
  emit_radial(out, c.a);
  out << YAML::Key << "b" << YAML::Value;
  emit_radial(out, c.b);
  out << YAML::Key << "mutation" << YAML::Value << mutation_name(c.mutation) << YAML::Key << "jump_nodes"
      << YAML::Value << c.jump_nodes << YAML::EndMap;
  out << YAML::Key << "intensity" << YAML::Value << c.z;
  if (c.seed) out << YAML::Key << "seed" << YAML::Value << *c.seed;
  out << YAML::Key << "threads" << YAML::Value << c.threads;
  out << YAML::Key << "phi" << YAML::Value;
  emit_profile(out, c.phi, c.dim);
  if (!c.observables.empty()) {
    out << YAML::Key << "observables" << YAML::Value << YAML::BeginSeq;
    for (const auto& o : c.observables) emit_observable(out, o, c.dim);
    out << YAML::EndSeq;
  }
  const auto& x = c.experiment;
  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "samples" << YAML::Value << x.samples << YAML::Key << "replicas" << YAML::Value << x.replicas;
  out << YAML::Key << "eps_diffusive" << YAML::Value;
  emit_list(out, x.eps_diffusive);
  out << YAML::Key << "eps_bd" << YAML::Value;
  emit_list(out, x.eps_bd);
  out << YAML::Key << "horizon" << YAML::Value << x.horizon << YAML::Key << "bins" << YAML::Value << x.bins
      << YAML::Key << "r_max" << YAML::Value << x.r_max << YAML::Key << "diffusion_dt" << YAML::Value
      << x.diffusion_dt << YAML::Key << "record_every" << YAML::Value << x.record_every << YAML::Key
      << "gap_replicas" << YAML::Value << x.gap_replicas << YAML::Key << "gap_horizon" << YAML::Value
      << x.gap_horizon << YAML::Key << "gap_dt" << YAML::Value << x.gap_dt << YAML::Key << "fock_sites"
      << YAML::Value << x.fock_sites << YAML::Key << "fock_side" << YAML::Value << x.fock_side << YAML::Key
      << "fock_n_max" << YAML::Value << x.fock_n_max << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_yaml(config)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> cli_seed, const RunConfig& config) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("CONTJUMP_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-')
      throw ConfigurationError(std::string("CONTJUMP_SEED: not an unsigned integer: '") + env + "'");
    return v;
  }
  if (config.seed) return *config.seed;
  return kDefaultSeed;
}

}  // namespace contjump
