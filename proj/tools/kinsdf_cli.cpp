// kinsdf: data generation, training, evaluation, benchmarking, isosurface
// export and grasp planning from one executable.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "kinsdf/checkpoint.hpp"
#include "kinsdf/composite.hpp"
#include "kinsdf/errors.hpp"
#include "kinsdf/evaluator.hpp"
#include "kinsdf/grasp.hpp"
#include "kinsdf/hashing.hpp"
#include "kinsdf/mesh.hpp"
#include "kinsdf/neural_field.hpp"
#include "kinsdf/robot_model.hpp"
#include "kinsdf/sampler.hpp"
#include "kinsdf/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kinsdf;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Inputs {
  std::vector<std::pair<std::string, fs::path>> files;
  void add(const std::string& role, const fs::path& p) { files.emplace_back(role, p); }
};

json resolved_options(const CLI::App& sub) {
  json out = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h" || name == "--config") continue;
    std::string key = opt->get_single_name();
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_type_size() == 0) {
        out[key] = true;
      } else if (r.size() == 1) {
        out[key] = r.front();
      } else {
        out[key] = r;
      }
    } else {
      out[key] = opt->get_type_size() == 0 ? json(false) : json(opt->get_default_str());
    }
  }
  return out;
}

void write_manifest(const fs::path& out, const CLI::App& sub, const Inputs& inputs, std::uint64_t seed,
                    double wall_seconds) {
  json m;
  m["command"] = sub.get_name();
  m["config"] = resolved_options(sub);
  json hashes = json::object();
  for (const auto& [role, path] : inputs.files) {
    hashes[role] = {{"path", path.string()}, {"fnv1a64", hex64(hash_file(path))}};
  }
  m["inputs"] = hashes;
  m["seed"] = seed;
  m["version"] = KINSDF_VERSION;
  m["wall_seconds"] = wall_seconds;
  std::ofstream f(out.string() + ".manifest.json");
  if (!f) throw IoError("cannot write manifest next to " + out.string());
  f << m.dump(2) << "\n";
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse '" + text + "' as a comma-separated list of numbers");
    }
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// A checkpoint, or the exact oracle of a robot when no checkpoint is given.
struct LoadedField {
  std::unique_ptr<RobotModel> robot;
  std::unique_ptr<DistanceField> field;
  std::optional<Checkpoint> checkpoint;
};

LoadedField load_field(const std::string& checkpoint, const std::string& robot_file, Inputs& inputs) {
  LoadedField lf;
  if (!robot_file.empty()) {
    lf.robot = std::make_unique<RobotModel>(load_robot(robot_file));
    inputs.add("robot", robot_file);
  }
  if (!checkpoint.empty()) {
    lf.checkpoint = read_checkpoint(checkpoint);
    inputs.add("checkpoint", checkpoint);
    if (lf.robot && lf.robot->hash() != lf.checkpoint->meta.robot_hash) {
      throw MismatchError(checkpoint + " was trained for robot '" + lf.checkpoint->meta.robot_name +
                          "', not for " + robot_file);
    }
    lf.field = std::make_unique<NeuralField>(lf.checkpoint->field);
  } else if (lf.robot) {
    lf.field = std::make_unique<OracleField>(*lf.robot);
  } else {
    throw UsageError("give --checkpoint or --oracle");
  }
  return lf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Configuration-conditioned link distance fields: data, training, evaluation and grasp planning"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice of the run");

  // gen-data
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a training/test dataset from the exact oracle");
  std::string gen_robot, gen_out, gen_csv, gen_workspace;
  std::uint64_t gen_configs = 1000, gen_points = 200;
  double gen_ds = -1.0, gen_near = 0.5, gen_inside = 0.5, gen_expand = 0.05;
  unsigned gen_workers = 1;
  gen->add_option("--robot", gen_robot, "Robot description file")->required();
  gen->add_option("--out", gen_out, "Dataset output path")->required();
  gen->add_option("--configs", gen_configs, "Number of configurations")->check(CLI::PositiveNumber);
  gen->add_option("--points", gen_points, "Points per configuration")->check(CLI::PositiveNumber);
  gen->add_option("--d-s", gen_ds, "Near-surface band half-width in meters (negative: 5% of reach)");
  gen->add_option("--near-fraction", gen_near, "Fraction of points drawn near the surface")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--inside-fraction", gen_inside, "Target fraction of inside points")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--limit-expansion", gen_expand, "Joint-limit expansion as a fraction of the range");
  gen->add_option("--workers", gen_workers, "Generation threads (output is identical for any count)");
  gen->add_option("--csv", gen_csv, "Also export the records as CSV");
  gen->add_option("--workspace", gen_workspace, "Uniform-point box xmin,ymin,zmin,xmax,ymax,zmax (default: base +- 1.05 reach)");

  // train
  CLI::App* tr = app.add_subcommand("train", "Train a distance field on a dataset");
  std::string tr_data, tr_out, tr_log, tr_variant = "rndf", tr_schedule = "cosine", tr_optimizer = "adaptive-moment";
  TrainConfig tcfg;
  ArchConfig arch;
  bool tr_no_encode_q = false, tr_no_encode_p = false;
  tr->add_option("--data", tr_data, "Training dataset")->required();
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--log", tr_log, "JSON-lines training log (default: <out>.log.jsonl)");
  tr->add_option("--variant", tr_variant, "rndf, multi-head-mlp or plain-mlp");
  tr->add_option("--latent", arch.latent_size, "Global feature size K")->check(CLI::PositiveNumber);
  tr->add_option("--frequencies", arch.encoding_frequencies, "Positional encoding frequencies L")->check(CLI::NonNegativeNumber);
  tr->add_flag("--no-encode-q", tr_no_encode_q, "Feed joint values without positional encoding");
  tr->add_flag("--no-encode-p", tr_no_encode_p, "Feed point coordinates without positional encoding");
  tr->add_option("--backbone", arch.backbone_widths, "Hidden widths before the global feature");
  tr->add_option("--head-width", arch.head_residual_width, "Per-link mid-level feature width")->check(CLI::PositiveNumber);
  tr->add_option("--head-regression", arch.head_regression_widths, "Per-link regression hidden widths");
  tr->add_option("--plain-widths", arch.plain_widths, "Hidden widths of plain-mlp");
  tr->add_option("--epochs", tcfg.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  tr->add_option("--batch", tcfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  tr->add_option("--lr", tcfg.learning_rate, "Initial learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--schedule", tr_schedule, "constant or cosine");
  tr->add_option("--optimizer", tr_optimizer, "sgd-momentum or adaptive-moment");
  tr->add_option("--weight-decay", tcfg.weight_decay, "L2 weight decay");
  tr->add_option("--momentum", tcfg.momentum, "Momentum of sgd-momentum");
  tr->add_option("--val-fraction", tcfg.validation_fraction, "Fraction of configurations held out for validation");
  tr->add_option("--patience", tcfg.patience, "Early-stopping patience in epochs (0 disables)");
  tr->add_option("--checkpoint-every", tcfg.checkpoint_every, "Write <out>.epoch<N> every N epochs (0 disables)");

  // eval
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a field on a test set");
  std::string ev_ckpt, ev_robot, ev_test, ev_json, ev_text;
  double ev_close = -1.0, ev_band = -1.0, ev_reach = -1.0;
  ev->add_option("--checkpoint", ev_ckpt, "Field checkpoint");
  ev->add_option("--oracle", ev_robot, "Robot file: evaluate its exact oracle, or check the checkpoint against it");
  ev->add_option("--test", ev_test, "Test dataset")->required();
  ev->add_option("--close-threshold", ev_close, "Close/far split in meters (negative: 0.1 m scaled by reach/0.8 m)");
  ev->add_option("--band", ev_band, "Classification band in meters (negative: 0.03 m scaled by reach/0.8 m)");
  ev->add_option("--json", ev_json, "Write the JSON report here");
  ev->add_option("--text", ev_text, "Write the text report here");
  ev->add_option("--robot-reach", ev_reach, "Reach in meters for the scaled thresholds (default: from --oracle, else 0.8)");

  // bench
  CLI::App* be = app.add_subcommand("bench", "Time batched inference against per-pair GJK");
  std::string be_ckpt, be_json;
  std::size_t be_batch = 100000, be_gjk_queries = 20000;
  int be_repeats = 5;
  bool be_f32 = false;
  be->add_option("--checkpoint", be_ckpt, "Field checkpoint")->required();
  be->add_option("--batch", be_batch, "Samples per timed batch")->check(CLI::PositiveNumber);
  be->add_option("--repeats", be_repeats, "Timed repetitions after one warm-up")->check(CLI::PositiveNumber);
  be->add_flag("--float32", be_f32, "Also time the single-precision path");
  be->add_option("--gjk-queries", be_gjk_queries, "GJK queries to time");
  be->add_option("--json", be_json, "Write the timing rows as JSON here");

  // isosurface
  CLI::App* iso = app.add_subcommand("isosurface", "Export a level set of min_k d_k as an OBJ mesh");
  std::string iso_ckpt, iso_robot, iso_q, iso_out, iso_box;
  double iso_level = 0.001;
  int iso_res = 64;
  iso->add_option("--checkpoint", iso_ckpt, "Field checkpoint");
  iso->add_option("--oracle", iso_robot, "Robot file (exact oracle when no checkpoint is given)");
  iso->add_option("--q", iso_q, "Configuration, comma-separated (default: zeros)");
  iso->add_option("--level", iso_level, "Level in meters");
  iso->add_option("--resolution", iso_res, "Grid samples per axis")->check(CLI::Range(2, 1024));
  iso->add_option("--box", iso_box, "xmin,ymin,zmin,xmax,ymax,zmax (default: robot workspace or training range)");
  iso->add_option("--out", iso_out, "OBJ output path")->required();

  // plan
  CLI::App* pl = app.add_subcommand("plan", "Plan a collision-aware grasp");
  std::string pl_system, pl_problem, pl_out, pl_q0, pl_contact_model = "soft-finger";
  int pl_restarts = 8;
  unsigned pl_workers = 1;
  PlannerOptions popt;
  bool pl_no_certify = false;
  pl->add_option("--system", pl_system, "System description")->required();
  pl->add_option("--problem", pl_problem, "Problem description")->required();
  pl->add_option("--out", pl_out, "Solution output path")->required();
  pl->add_option("--restarts", pl_restarts, "Random restarts (0: only --q0)")->check(CLI::NonNegativeNumber);
  pl->add_option("--workers", pl_workers, "Parallel restart workers (result does not depend on this)");
  pl->add_option("--q0", pl_q0, "Initial configuration, comma-separated");
  pl->add_option("--tau", popt.tau, "Initial smoothing temperature");
  pl->add_option("--max-outer", popt.max_outer, "Augmented-Lagrangian outer iterations");
  pl->add_option("--inner", popt.inner_iterations, "L-BFGS iterations per outer iteration");
  pl->add_option("--field-rmse", popt.field_close_rmse, "Field close RMSE in meters for discrepancy flags");
  pl->add_option("--contact-model", pl_contact_model, "soft-finger or hard-point");
  pl->add_flag("--no-certify", pl_no_certify, "Do not require the exact-oracle recheck to pass");

  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(); };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  Inputs inputs;
  try {
    if (gen->parsed()) {
      const RobotModel robot = load_robot(gen_robot);
      inputs.add("robot", gen_robot);
      SamplerConfig cfg = SamplerConfig::defaults_for(robot);
      cfg.configs_count = gen_configs;
      cfg.points_per_config = gen_points;
      if (gen_ds >= 0.0) cfg.d_s = gen_ds;
      cfg.near_surface_fraction = gen_near;
      cfg.inside_fraction = gen_inside;
      cfg.limit_expansion = gen_expand;
      cfg.seed = seed;
      cfg.workers = std::max(1u, gen_workers);
      if (!gen_workspace.empty()) {
        const Eigen::VectorXd b = parse_vector(gen_workspace);
        if (b.size() != 6 || (b.head(3).array() >= b.tail(3).array()).any()) {
          throw UsageError("--workspace needs xmin,ymin,zmin,xmax,ymax,zmax with min < max");
        }
        cfg.workspace = Eigen::AlignedBox3d(Eigen::Vector3d(b.head(3)), Eigen::Vector3d(b.tail(3)));
      }
      cfg.validate(robot);
      const SdfDataset ds = generate_dataset(robot, cfg);
      write_dataset(ds, gen_out);
      if (!gen_csv.empty()) export_dataset_csv(ds, gen_csv);
      std::cout << "wrote " << ds.size() << " records (" << ds.meta.links << " links, inside fraction "
                << ds.inside_fraction() << ") to " << gen_out << "\n";
      write_manifest(gen_out, *gen, inputs, seed, elapsed());
    } else if (tr->parsed()) {
      const SdfDataset ds = read_dataset(tr_data);
      inputs.add("data", tr_data);
      arch.variant = parse_variant(tr_variant);
      arch.encode_q = !tr_no_encode_q;
      arch.encode_p = !tr_no_encode_p;
      tcfg.lr_schedule = parse_schedule(tr_schedule);
      tcfg.optimizer = parse_optimizer(tr_optimizer);
      tcfg.seed = seed;
      tcfg.validate();
      TrainingMetadata meta;
      meta.robot_name = ds.meta.robot_name;
      meta.robot_hash = ds.meta.robot_hash;
      meta.dataset_hash = hash_file(tr_data);
      meta.seed = seed;
      std::ofstream log(tr_log.empty() ? tr_out + ".log.jsonl" : tr_log);
      if (!log) throw IoError("cannot write training log for " + tr_out);
      TrainHooks hooks;
      hooks.on_epoch = [&](const EpochRecord& r) {
        write_log_record(log, r);
        log.flush();
        std::cout << "epoch " << r.epoch << "  train " << r.train_rmse * 1e3 << " mm  val " << r.val_rmse * 1e3
                  << " mm\n";
      };
      hooks.on_checkpoint = [&](int epoch, const NeuralField& best) {
        TrainingMetadata m = meta;
        m.epochs_run = static_cast<std::uint32_t>(epoch);
        write_checkpoint(tr_out + ".epoch" + std::to_string(epoch), best, m);
      };
      const TrainResult res = train(ds, arch, tcfg, hooks);
      meta.epochs_run = static_cast<std::uint32_t>(res.log.size());
      meta.best_val_rmse = res.best_val_rmse;
      write_checkpoint(tr_out, res.field, meta);
      write_manifest(tr_out, *tr, inputs, seed, elapsed());
      if (res.diverged) {
        std::cerr << "training diverged; wrote the best parameters seen (epoch " << res.best_epoch << ")\n";
        return kNumerical;
      }
      std::cout << "best validation RMSE " << res.best_val_rmse * 1e3 << " mm at epoch " << res.best_epoch << "\n";
    } else if (ev->parsed()) {
      LoadedField lf = load_field(ev_ckpt, ev_robot, inputs);
      const SdfDataset test = read_dataset(ev_test);
      inputs.add("test", ev_test);
      const std::uint64_t expected = lf.checkpoint ? lf.checkpoint->meta.robot_hash : lf.robot->hash();
      if (test.meta.robot_hash != expected) {
        throw MismatchError("test set " + ev_test + " was generated for robot '" + test.meta.robot_name +
                            "', which does not match the field");
      }
      const double reach = ev_reach > 0 ? ev_reach : (lf.robot ? lf.robot->reach() : kReferenceReach);
      const double close = ev_close >= 0 ? ev_close : scaled_close_threshold(reach);
      const double band = ev_band >= 0 ? ev_band : scaled_band(reach);
      EvalReport rep;
      rep.field_description = lf.field->describe();
      rep.parameter_count = lf.field->parameter_count();
      rep.model_hash = lf.checkpoint ? hex64(hash_file(ev_ckpt)) : hex64(lf.robot->hash());
      rep.dataset_hash = hex64(hash_file(ev_test));
      rep.test_size = test.size();
      rep.rmse = eval_rmse(*lf.field, test, close);
      try {
        rep.classification = eval_classification(*lf.field, test, band);
      } catch (const InvalidArgument& e) {
        std::cerr << "classification skipped: " << e.what() << "\n";
      }
      const std::string text = format_report_text(rep);
      std::cout << text;
      if (!ev_text.empty()) std::ofstream(ev_text) << text;
      if (!ev_json.empty()) {
        std::ofstream f(ev_json);
        if (!f) throw IoError("cannot write " + ev_json);
        f << format_report_json(rep);
        write_manifest(ev_json, *ev, inputs, seed, elapsed());
      }
    } else if (be->parsed()) {
      const Checkpoint ck = read_checkpoint(be_ckpt);
      inputs.add("checkpoint", be_ckpt);
      EvalReport rep;
      rep.field_description = ck.field.describe();
      rep.parameter_count = ck.field.parameter_count();
      rep.threads = 1;
      rep.timings.push_back(bench_throughput(ck.field, be_batch, be_repeats, false, seed));
      if (be_f32) rep.timings.push_back(bench_throughput(ck.field, be_batch, be_repeats, true, seed));
      if (be_gjk_queries > 0) rep.timings.push_back(bench_gjk(be_gjk_queries, ck.field.link_count(), seed));
      std::cout << format_report_text(rep);
      if (!be_json.empty()) {
        std::ofstream f(be_json);
        if (!f) throw IoError("cannot write " + be_json);
        f << format_report_json(rep);
        write_manifest(be_json, *be, inputs, seed, elapsed());
      }
    } else if (iso->parsed()) {
      LoadedField lf = load_field(iso_ckpt, iso_robot, inputs);
      Eigen::VectorXd q = iso_q.empty() ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lf.field->dof()))
                                        : parse_vector(iso_q);
      if (static_cast<std::size_t>(q.size()) != lf.field->dof()) {
        throw UsageError("--q needs " + std::to_string(lf.field->dof()) + " values");
      }
      Eigen::AlignedBox3d box;
      if (!iso_box.empty()) {
        const Eigen::VectorXd b = parse_vector(iso_box);
        if (b.size() != 6 || (b.head(3).array() >= b.tail(3).array()).any()) {
          throw UsageError("--box needs xmin,ymin,zmin,xmax,ymax,zmax with min < max");
        }
        box = Eigen::AlignedBox3d(Eigen::Vector3d(b.head(3)), Eigen::Vector3d(b.tail(3)));
      } else if (lf.robot) {
        box = SamplerConfig::defaults_for(*lf.robot).workspace;
      } else {
        // Training range: normalization maps it onto [-1, 1].
        const ArchConfig& a = lf.checkpoint->field.arch();
        if (a.input_scale.size() == 0) throw UsageError("--box is required for a checkpoint without normalization");
        const auto m = a.m;
        const Eigen::Vector3d lo = a.input_offset.segment(m, 3).array() - a.input_scale.segment(m, 3).array().inverse();
        const Eigen::Vector3d hi = a.input_offset.segment(m, 3).array() + a.input_scale.segment(m, 3).array().inverse();
        box = Eigen::AlignedBox3d(lo, hi);
      }
      const IsosurfaceResult r = extract_isosurface(*lf.field, q, iso_level, box, iso_res);
      write_obj(r.mesh, iso_out);
      if (!r.warning.empty()) std::cerr << "warning: " << r.warning << "\n";
      std::cout << "wrote " << r.mesh.faces.size() << " triangles to " << iso_out << "\n";
      write_manifest(iso_out, *iso, inputs, seed, elapsed());
    } else if (pl->parsed()) {
      const CompositeSystem sys = load_system(pl_system);
      inputs.add("system", pl_system);
      const GraspProblem prob = load_problem(pl_problem, sys);
      inputs.add("problem", pl_problem);
      if (pl_contact_model == "soft-finger") {
        popt.contact_model = ContactModel::soft_finger;
      } else if (pl_contact_model == "hard-point") {
        popt.contact_model = ContactModel::hard_point;
      } else {
        throw UsageError("--contact-model must be soft-finger or hard-point");
      }
      popt.certify_with_oracle = !pl_no_certify;
      std::vector<GraspSolution> all;
      std::size_t best = 0;
      if (!pl_q0.empty()) {
        const Eigen::VectorXd q0 = parse_vector(pl_q0);
        if (static_cast<std::size_t>(q0.size()) != sys.dof()) {
          throw UsageError("--q0 needs " + std::to_string(sys.dof()) + " values");
        }
        all.push_back(plan_grasp(sys, prob, q0, popt));
      }
      if (pl_restarts > 0) {
        RestartResult rr = plan_with_restarts(sys, prob, pl_restarts, seed, popt, std::max(1u, pl_workers));
        const std::size_t offset = all.size();
        for (auto& s : rr.solutions) all.push_back(std::move(s));
        best = offset + rr.best;
        if (offset == 1 && all[0].status == GraspStatus::converged &&
            (all[best].status != GraspStatus::converged || all[0].diagnostics.objective <= all[best].diagnostics.objective)) {
          best = 0;
        }
      }
      if (all.empty()) throw UsageError("give --q0 or a positive --restarts");
      std::ofstream f(pl_out);
      if (!f) throw IoError("cannot write " + pl_out);
      std::ostringstream text;
      text << format_solution(sys, prob, all[best]);
      std::size_t converged = 0;
      for (const GraspSolution& s : all) converged += s.status == GraspStatus::converged ? 1 : 0;
      text << "\n[attempts]\ncount = " << all.size() << "\nconverged = " << converged << "\nselected = " << best << "\n";
      for (const GraspSolution& s : all) {
        text << "\n[[attempt]]\nseed = " << s.seed << "\nstatus = \"" << status_name(s.status)
             << "\"\nobjective = " << s.diagnostics.objective << "\n";
      }
      f << text.str();
      std::cout << text.str();
      write_manifest(pl_out, *pl, inputs, seed, elapsed());
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const SamplingError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  }
  return kOk;
}
