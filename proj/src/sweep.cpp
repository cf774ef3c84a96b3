#include "hig/harness.hpp"

#include <cmath>
#include <fstream>
#include <map>

namespace hig::harness {

namespace {

std::string value_tag(const Json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+')) c = '_';
  return s;
}

std::string csv_field(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::vector<SweepPoint> sweep(const Json& grid, const std::filesystem::path& out_dir) {
  if (!grid.is_object()) throw ConfigError("grid file must be a JSON object");
  const Json base = grid.value("base", Json::object());
  const Json axes = grid.value("grid", Json::object());
  if (!base.is_object() || !axes.is_object()) throw ConfigError("grid file needs object-valued 'base' and 'grid'");
  for (const auto& [k, v] : grid.items())
    if (k != "base" && k != "grid") throw ConfigError("unknown grid file key '" + k + "'");

  std::vector<std::string> keys;
  std::vector<std::vector<Json>> values;
  for (const auto& [k, v] : axes.items()) {
    if (!v.is_array() || v.empty()) throw ConfigError("grid axis '" + k + "' must be a non-empty list");
    keys.push_back(k);
    values.emplace_back(v.begin(), v.end());
  }
  // Fail on unknown keys before any run starts.
  {
    Json probe = base;
    for (std::size_t a = 0; a < keys.size(); ++a) probe[keys[a]] = values[a].front();
    probe["out_dir"] = "";
    auto cfg = config_from_json(probe);
    cfg.resolve_defaults();
  }

  std::filesystem::create_directories(out_dir);
  std::vector<SweepPoint> points;
  std::vector<std::size_t> pos(keys.size(), 0);
  std::ofstream summary(out_dir / "summary.csv");
  summary << "point,status,final_test_loss,updates,wall_ms";
  for (const auto& k : keys) summary << ',' << k;
  summary << '\n';

  for (std::size_t index = 0;; ++index) {
    Json cfg_json = base;
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "p%03zu", index);
    std::string name = prefix;
    for (std::size_t a = 0; a < keys.size(); ++a) {
      cfg_json[keys[a]] = values[a][pos[a]];
      name += "_" + keys[a] + "=" + value_tag(values[a][pos[a]]);
    }
    const auto dir = out_dir / name;
    cfg_json["out_dir"] = dir.string();

    SweepPoint pt{name, dir.string(), "", std::nan(""), 0, 0.0};
    try {
      const auto r = run_experiment(config_from_json(cfg_json));
      pt.status = r.status;
      pt.final_test_loss = r.final_test_loss();
      pt.updates = r.updates;
      pt.wall_ms = r.wall_ms;
    } catch (const std::exception& ex) {
      pt.status = std::string("failed: ") + ex.what();
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "error.txt") << ex.what() << '\n';
    }
    points.push_back(pt);

    std::string status = pt.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    summary << pt.name << ',' << status << ',' << format_number(pt.final_test_loss) << ',' << pt.updates << ','
            << format_number(pt.wall_ms);
    for (std::size_t a = 0; a < keys.size(); ++a) summary << ',' << csv_field(values[a][pos[a]]);
    summary << '\n';
    summary.flush();

    // Odometer over the axes, last axis fastest.
    std::size_t a = keys.size();
    while (a > 0) {
      --a;
      if (++pos[a] < values[a].size()) break;
      pos[a] = 0;
      if (a == 0) return points;
    }
    if (keys.empty()) return points;
  }
}

Diagnosis diagnose(const std::filesystem::path& run_dir) {
  std::ifstream is(run_dir / "meta.json");
  if (!is) throw std::runtime_error("no meta.json in " + run_dir.string());
  const Json meta = Json::parse(is);
  auto cfg = config_from_json(meta.at("config"));
  cfg.resolve_defaults();
  const Problem p = make_problem(cfg);

  std::map<std::int64_t, std::filesystem::path> files;
  if (std::filesystem::exists(run_dir / "checkpoints"))
    for (const auto& e : std::filesystem::directory_iterator(run_dir / "checkpoints"))
      if (e.path().extension() == ".bin") files[std::stoll(e.path().stem().string())] = e.path();
  const std::int64_t final_update = meta.value("updates", std::int64_t{0});
  if (!files.count(final_update) && std::filesystem::exists(run_dir / "params.bin"))
    files[final_update] = run_dir / "params.bin";
  if (files.empty()) throw std::runtime_error("no parameter files in " + run_dir.string());

  Diagnosis d;
  const Vector probe = Vector::Constant(1, cfg.probe_x);
  ad::Tape tape(p.graph);
  for (const auto& [update, path] : files) {
    const auto f = nn::load_params(path);
    if (!(f.spec == p.spec)) throw std::runtime_error("checkpoint " + path.string() + " does not match the run's network");
    d.checkpoint_updates.push_back(update);
    d.stats.push_back(nn::neuron_saturation_stats(p.spec, f.theta, p.test.inputs));
    if (p.kind == Experiment::Toy) d.trajectory.push_back(tape.forward(f.theta, probe));
  }
  d.saturated = nn::saturated_neurons(d.stats.front().stddev, d.stats.back().stddev, cfg.saturation_threshold);

  std::ofstream sat(run_dir / "saturation.csv");
  sat << "update,neuron,mean,std,saturated\n";
  for (std::size_t c = 0; c < d.stats.size(); ++c) {
    const auto flagged = nn::saturated_neurons(d.stats.front().stddev, d.stats[c].stddev, cfg.saturation_threshold);
    for (Index n = 0; n < d.stats[c].mean.size(); ++n) {
      const bool s = std::find(flagged.begin(), flagged.end(), n) != flagged.end();
      sat << d.checkpoint_updates[c] << ',' << n << ',' << format_number(d.stats[c].mean[n]) << ','
          << format_number(d.stats[c].stddev[n]) << ',' << (s ? 1 : 0) << '\n';
    }
  }
  if (p.kind == Experiment::Toy) {
    d.probe_target = Vector{{std::sin(6.0 * cfg.probe_x), std::cos(9.0 * cfg.probe_x)}};
    std::ofstream traj(run_dir / "trajectory.csv");
    traj << "update,y1,y2,target1,target2\n";
    for (std::size_t c = 0; c < d.trajectory.size(); ++c)
      traj << d.checkpoint_updates[c] << ',' << format_number(d.trajectory[c][0]) << ','
           << format_number(d.trajectory[c][1]) << ',' << format_number(d.probe_target[0]) << ','
           << format_number(d.probe_target[1]) << '\n';
  }
  return d;
}

}  // namespace hig::harness
