// nsf: generate fields, train stream-function networks, evaluate and export them.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.
// eval, export and trace print `median_err_deg=<value>` as their last stdout line.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "nsf/nsf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hash_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw nsf::IoError("cannot open '" + path.string() + "' for hashing");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(nsf::detail::fnv1a(bytes.data(), bytes.size())));
  return buf;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_extension();
  out += suffix;
  return out;
}

nsf::Dims parse_dims(const std::vector<int>& v) {
  nsf::Dims d = v.size() == 1 ? nsf::cube(v[0]) : nsf::Dims{v[0], v[1], v[2]};
  if (!d.valid()) throw nsf::UsageError("dims must be positive");
  return d;
}

std::string format_median(double deg) {
  std::ostringstream os;
  os.precision(6);
  os << "median_err_deg=" << deg;
  return os.str();
}

class Run {
 public:
  explicit Run(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& p) { inputs_[p.string()] = hash_file(p); }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  void config(json c) { config_ = std::move(c); }

  void write(const fs::path& path) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m{{"command", command_},    {"config", config_},  {"input_hashes_fnv1a64", inputs_},
           {"outputs", outputs_},    {"version", nsf::kVersion}, {"wall_seconds", wall}};
    nsf::detail::write_json(m, path);
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json config_ = json::object();
  json inputs_ = json::object();
  std::vector<std::string> outputs_;
};

nsf::VectorField load_field(const fs::path& p) { return nsf::load_raw(p); }

// ---------------------------------------------------------------- generate

struct GenerateOpts {
  std::string name;
  std::vector<int> dims{32};
  std::optional<double> A, B, C, omega, U, radius, time;
  bool curl = false;
  std::string out;
};

void cmd_generate(const GenerateOpts& o) {
  Run run("generate");
  nsf::ParamMap params;
  const std::pair<const char*, const std::optional<double>*> keys[] = {
      {"A", &o.A}, {"B", &o.B}, {"C", &o.C}, {"omega", &o.omega}, {"U", &o.U}, {"radius", &o.radius}, {"time", &o.time}};
  for (const auto& [k, v] : keys)
    if (*v) params[k] = **v;
  const nsf::Dims d = parse_dims(o.dims);
  nsf::VectorField field = nsf::gen_analytic(o.name, d, params);
  if (o.curl) field = nsf::curl(field);
  const fs::path out = o.out.empty() ? fs::path(o.name + (o.curl ? "_curl_" : "_") + nsf::dims_tag(d) + ".raw")
                                     : fs::path(o.out);
  nsf::save_raw(field, out);
  run.config({{"name", o.name}, {"dims", {d.nx, d.ny, d.nz}}, {"params", params}, {"curl", o.curl}});
  run.output(out);
  run.output(nsf::sidecar_path(out));
  run.write(with_suffix(out, "_run.json"));
  std::cout << out.string() << '\n';
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string input, config, out = "model.nsf", normals;
  json flags = json::object();
};

void cmd_train(const TrainOpts& o) {
  Run run("train");
  nsf::TrainConfig cfg;
  if (!o.config.empty()) {
    cfg.merge_json(nsf::detail::read_json(o.config));
    run.input(o.config);
  }
  cfg.merge_json(o.flags);
  cfg.validate();
  const nsf::VectorField field = load_field(o.input);
  run.input(o.input);
  std::optional<nsf::VectorField> normals;
  if (!o.normals.empty()) {
    normals = load_field(o.normals);
    run.input(o.normals);
  }
  json resolved = cfg.to_json();
  resolved["batch"] = cfg.resolved_batch(nsf::non_degenerate_voxels(field).size());
  cfg.batch_size = resolved["batch"].get<int>();
  run.config(resolved);

  const auto result = nsf::train<float>(field, cfg, normals ? &*normals : nullptr, [](const nsf::StepRecord& r) {
    std::fprintf(stderr, "iter %6d  lr %.3g  loss %.6g  (main %.6g, seeds %.6g)  %.1fs\n", r.iteration, r.lr,
                 r.loss.total, r.loss.main, r.loss.seeds, r.wall_seconds);
  });

  const fs::path model(o.out);
  if (model.has_parent_path()) fs::create_directories(model.parent_path());
  nsf::save_model(result.net, model, json{{"input", o.input}, {"input_hash_fnv1a64", hash_file(o.input)}, {"config", resolved}});
  const fs::path history = with_suffix(model, "_history.csv");
  {
    std::ofstream hs(history, std::ios::trunc);
    if (!hs) throw nsf::IoError("cannot write '" + history.string() + "'");
    hs << nsf::history_csv(result.history);
  }
  run.output(model);
  run.output(nsf::model_manifest_path(model));
  run.output(history);
  run.write(with_suffix(model, "_run.json"));
  const auto& last = result.history.back();
  std::cout << json{{"model", model.string()}, {"iterations", cfg.iterations}, {"final_loss", last.loss.total},
                    {"wall_seconds", last.wall_seconds}}
                   .dump()
            << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string model, input, error_out, report;
};

void cmd_eval(const EvalOpts& o) {
  Run run("eval");
  const auto net = nsf::load_model<float>(o.model);
  const nsf::VectorField field = load_field(o.input);
  run.input(o.model);
  run.input(o.input);
  const nsf::NetModel<float> model(net);
  const nsf::ErrVolume err = nsf::err_volume(model, field);
  json report{{"model", o.model}, {"input", o.input}, {"err", err.stats.to_json()}};
  if (!o.error_out.empty()) {
    const fs::path p(o.error_out);
    if (p.extension() == ".vtk")
      nsf::write_vtk(err.degrees, p, "err_deg");
    else
      nsf::save_raw(err.degrees, p);
    run.output(p);
    report["error_volume"] = p.string();
  }
  if (!o.report.empty()) {
    nsf::detail::write_json(report, o.report);
    run.output(o.report);
  }
  run.config({{"error_out", o.error_out}, {"report", o.report}});
  run.write(with_suffix(fs::path(o.model), "_eval_run.json"));
  std::cout << report.dump(2) << '\n' << format_median(err.stats.median) << '\n';
}

// ---------------------------------------------------------------- export

struct ExportOpts {
  std::string model, input, out = "export", stem = "stream";
  std::vector<int> res;
  std::vector<std::string> outputs{"scalar_raw"};
};

void cmd_export(const ExportOpts& o) {
  Run run("export");
  const auto net = nsf::load_model<float>(o.model);
  const nsf::VectorField field = load_field(o.input);
  run.input(o.model);
  run.input(o.input);
  nsf::ExportSpec spec;
  spec.directory = o.out;
  spec.stem = o.stem;
  for (const auto& s : o.outputs) spec.outputs.insert(nsf::parse_export_output(s));
  if (o.res.empty())
    spec.resolutions = nsf::ExportSpec::default_resolutions(field.dims());
  else
    for (int r : o.res) spec.resolutions.push_back(nsf::cube(r));
  const json manifest = nsf::export_bundle(nsf::NetModel<float>(net), field, spec);
  for (const auto& f : manifest["files"])
    for (const char* key : {"raw", "sidecar", "vtk"})
      if (f.contains(key)) run.output(spec.directory / f[key].get<std::string>());
  run.output(spec.directory / (spec.stem + "_manifest.json"));
  json res = json::array();
  for (const auto& d : spec.resolutions) res.push_back({d.nx, d.ny, d.nz});
  run.config({{"resolutions", res}, {"outputs", o.outputs}, {"directory", o.out}, {"stem", o.stem}});
  run.write(spec.directory / (spec.stem + "_run.json"));
  std::cout << manifest.dump(2) << '\n' << format_median(manifest["err"]["median_deg"].get<double>()) << '\n';
}

// ---------------------------------------------------------------- trace

struct TraceOpts {
  std::string model, input, report;
  int seeds = 50;
  double h = 0.01;
  int max_steps = 2000;
  std::uint64_t seed = 0;
  bool check_constancy = false;
};

void cmd_trace(const TraceOpts& o) {
  Run run("trace");
  if (o.seeds < 1) throw nsf::UsageError("--seeds must be at least 1");
  const auto net = nsf::load_model<float>(o.model);
  const nsf::VectorField field = load_field(o.input);
  run.input(o.model);
  run.input(o.input);
  const nsf::NetModel<float> model(net);
  std::vector<nsf::Streamline> lines;
  json per_line = json::array();
  for (const auto& s : nsf::random_seeds(field, static_cast<std::size_t>(o.seeds), o.seed)) {
    lines.push_back(nsf::trace_streamline(field, s, o.h, o.max_steps));
    per_line.push_back({{"seed", {s.x, s.y, s.z}},
                        {"points", lines.back().points.size()},
                        {"termination", nsf::to_string(lines.back().reason)}});
  }
  json report{{"model", o.model}, {"input", o.input}, {"h", o.h}, {"max_steps", o.max_steps}, {"lines", per_line}};
  if (o.check_constancy) {
    const auto c = nsf::constancy_check(model, lines);
    report["constancy"] = c.to_json();
    for (std::size_t i = 0; i < lines.size(); ++i) report["lines"][i]["relative_variation"] = c.relative_variation[i];
  }
  const nsf::ErrVolume err = nsf::err_volume(model, field);
  report["err"] = err.stats.to_json();
  if (!o.report.empty()) {
    nsf::detail::write_json(report, o.report);
    run.output(o.report);
  }
  run.config({{"seeds", o.seeds}, {"h", o.h}, {"max_steps", o.max_steps}, {"seed", o.seed},
              {"check_constancy", o.check_constancy}});
  run.write(with_suffix(fs::path(o.model), "_trace_run.json"));
  std::cout << report.dump(2) << '\n' << format_median(err.stats.median) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural stream functions: learn f with grad f orthogonal to a vector field"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nsf::kVersion);

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Write an analytic vector field as .raw + JSON sidecar");
  std::string names;
  for (const auto& n : nsf::analytic_names()) names += (names.empty() ? "" : ", ") + n;
  g->add_option("name", gen.name, "Field name: " + names)->required();
  g->add_option("--dims", gen.dims, "Samples per axis (one value or three)")->expected(1, 3);
  g->add_option("--A", gen.A, "ABC parameter A");
  g->add_option("--B", gen.B, "ABC parameter B");
  g->add_option("--C", gen.C, "ABC parameter C");
  g->add_option("--omega", gen.omega, "Rigid rotation angular speed");
  g->add_option("--U", gen.U, "Hill vortex free-stream speed");
  g->add_option("--radius", gen.radius, "Hill vortex radius");
  g->add_option("--time", gen.time, "Tornado time parameter");
  g->add_flag("--curl", gen.curl, "Write the curl of the field (vortex lines) instead");
  g->add_option("--out", gen.out, "Output .raw path");

  TrainOpts tr;
  std::string loss, rake;
  std::optional<int> iterations, batch, hidden_layers, width, decay_every, log_every;
  std::optional<double> lr, omega0, seeds_weight;
  std::optional<std::uint64_t> train_seed;
  bool normalize_v = false, seeds_signed = false;
  auto* t = app.add_subcommand("train", "Train a stream-function network on a vector field");
  t->add_option("--input", tr.input, "Vector field .raw")->required();
  t->add_option("--config", tr.config, "Flat JSON config (flags override it)");
  t->add_option("--out", tr.out, "Model path")->capture_default_str();
  t->add_option("--normals", tr.normals, "Precomputed principal normal field .raw (pss losses)");
  t->add_option("--loss", loss, "perp | pss | perp+seeds | pss+seeds");
  t->add_option("--iterations", iterations);
  t->add_option("--batch", batch);
  t->add_option("--lr", lr, "Initial learning rate");
  t->add_option("--decay-every", decay_every, "Iterations between tenfold learning-rate decays");
  t->add_option("--seed", train_seed);
  t->add_option("--rake", rake, "JSON spec or segment:x1,y1,z1,x2,y2,z2[,n] or circle:cx,cy,cz,nx,ny,nz,r[,n]");
  t->add_option("--hidden-layers", hidden_layers);
  t->add_option("--width", width);
  t->add_option("--omega0", omega0);
  t->add_option("--seeds-weight", seeds_weight);
  t->add_flag("--seeds-signed", seeds_signed, "Use the signed mean of f on the rake");
  t->add_flag("--normalize-v", normalize_v, "Normalise V to unit length in the perp loss");
  t->add_option("--log-every", log_every);

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Orthogonality error of a model against a vector field");
  e->add_option("--model", ev.model)->required();
  e->add_option("--input", ev.input, "Vector field .raw")->required();
  e->add_option("--error-out", ev.error_out, "Write the per-voxel error (degrees) as .raw or .vtk");
  e->add_option("--report", ev.report, "Write the JSON report here too");

  ExportOpts ex;
  auto* x = app.add_subcommand("export", "Sample a model onto grids and write interchange files");
  x->add_option("--model", ex.model)->required();
  x->add_option("--input", ex.input, "Vector field the model was trained on")->required();
  x->add_option("--res", ex.res, "Grid resolutions (default: 4x the field resolution)");
  x->add_option("--outputs", ex.outputs, "scalar_raw scalar_vtk error_raw error_vtk")->capture_default_str()->delimiter(',');
  x->add_option("--out", ex.out, "Output directory")->capture_default_str();
  x->add_option("--stem", ex.stem, "File name prefix")->capture_default_str();

  TraceOpts tc;
  auto* c = app.add_subcommand("trace", "Trace RK4 streamlines and check f along them");
  c->add_option("--model", tc.model)->required();
  c->add_option("--input", tc.input, "Vector field .raw")->required();
  c->add_option("--seeds", tc.seeds, "Number of random seeds")->capture_default_str();
  c->add_option("--step", tc.h, "RK4 step size h")->capture_default_str();
  c->add_option("--max-steps", tc.max_steps, "Steps per streamline")->capture_default_str();
  c->add_option("--seed", tc.seed, "RNG seed for seed placement")->capture_default_str();
  c->add_flag("--check-constancy", tc.check_constancy, "Report f variation along each streamline");
  c->add_option("--report", tc.report, "Write the JSON report here too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) {
      cmd_generate(gen);
    } else if (*t) {
      json& f = tr.flags;
      if (!loss.empty()) f["loss"] = loss;
      if (iterations) f["iterations"] = *iterations;
      if (batch) f["batch"] = *batch;
      if (lr) f["lr"] = *lr;
      if (decay_every) f["decay_every"] = *decay_every;
      if (train_seed) f["seed"] = *train_seed;
      if (!rake.empty()) f["rake"] = rake;
      if (hidden_layers) f["hidden_layers"] = *hidden_layers;
      if (width) f["width"] = *width;
      if (omega0) f["omega0"] = *omega0;
      if (seeds_weight) f["seeds_weight"] = *seeds_weight;
      if (seeds_signed) f["seeds_signed"] = true;
      if (normalize_v) f["normalize_v"] = true;
      if (log_every) f["log_every"] = *log_every;
      cmd_train(tr);
    } else if (*e) {
      cmd_eval(ev);
    } else if (*x) {
      cmd_export(ex);
    } else if (*c) {
      cmd_trace(tc);
    }
  } catch (const nsf::UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
