// spf: fit paths, check assumptions, emit projection / Δλ tables, run
// scenarios and zero-dynamics portraits.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spf/io.hpp"
#include "spf/spf.hpp"

namespace {

using spf::io::json;

enum Exit { ok = 0, invalid = 1, runtime = 2 };

bool is_validation(spf::ErrorCode c) {
  using spf::ErrorCode;
  switch (c) {
    case ErrorCode::invalid_config:
    case ErrorCode::io:
    case ErrorCode::parameter:
    case ErrorCode::domain:
    case ErrorCode::degenerate_chord:
    case ErrorCode::fit_failure:
    case ErrorCode::unsupported_order: return true;
    default: return false;
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    spf::io::write_text_file(out, text);
  }
}

spf::SplinePath load_path(const std::string& file) {
  return spf::io::path_spec_from_json(spf::io::read_json_file(file), std::filesystem::path(file).parent_path());
}

spf::io::ScenarioFile load_scenario(const std::string& file, const std::vector<std::string>& overrides) {
  json doc = spf::io::read_json_file(file);
  for (const auto& o : overrides) spf::io::apply_override(doc, o);
  return spf::io::scenario_from_json(doc, std::filesystem::path(file).parent_path());
}

std::vector<Eigen::VectorXd> load_points(const std::string& file) {
  const json j = spf::io::read_json_file(file);
  const json& arr = j.is_object() && j.contains("points") ? j["points"] : j;
  std::vector<Eigen::VectorXd> pts;
  if (!arr.is_array()) throw spf::Error(spf::ErrorCode::invalid_config, file + ": expected an array of points");
  for (const auto& p : arr) pts.push_back(spf::io::detail::vector(p, "points"));
  return pts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-following toolkit: spline paths, projection, closed-loop simulation"};
  app.require_subcommand(1);

  std::string waypoints, out, summary, equilibria, input, points_file;
  std::vector<std::string> overrides;
  int smoothness = -1, samples = 64, scan = 4000, grid = 64;

  auto* fit = app.add_subcommand("fit", "fit a spline through waypoints");
  fit->add_option("--waypoints", waypoints, "waypoint JSON")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", out, "path JSON (default stdout)");
  fit->add_option("--smoothness", smoothness, "junction continuity order (default: from file or p+1)");

  auto* check = app.add_subcommand("check", "report path assumptions");
  check->add_option("path", input, "path or waypoint JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--grid", grid, "samples per segment");

  auto* project = app.add_subcommand("project", "closest path points for a list of outputs");
  project->add_option("path", input, "path or waypoint JSON")->required()->check(CLI::ExistingFile);
  project->add_option("--points", points_file, "JSON array of points")->required()->check(CLI::ExistingFile);
  project->add_option("--out", out, "CSV (default stdout)");

  auto* dlambda = app.add_subcommand("dlambda", "allowable per-step parameter change table");
  dlambda->add_option("path", input, "path or waypoint JSON")->required()->check(CLI::ExistingFile);
  dlambda->add_option("--samples", samples, "λ* samples per segment")->check(CLI::PositiveNumber);
  dlambda->add_option("--scan", scan, "scan resolution per segment")->check(CLI::PositiveNumber);
  dlambda->add_option("--out", out, "CSV (default stdout)");

  auto* run = app.add_subcommand("run", "closed-loop simulation of a scenario");
  run->add_option("scenario", input, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "log CSV (default stdout)");
  run->add_option("--summary", summary, "summary JSON");
  run->add_option("--set", overrides, "override key=value (dotted keys)");

  auto* portrait = app.add_subcommand("portrait", "zero-dynamics phase portrait");
  portrait->add_option("scenario", input, "scenario JSON with a portrait block")->required()->check(CLI::ExistingFile);
  portrait->add_option("--out", out, "flows CSV (default stdout)");
  portrait->add_option("--equilibria", equilibria, "equilibria JSON");
  portrait->add_option("--set", overrides, "override key=value (dotted keys)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return invalid;
  }

  try {
    if (*fit) {
      auto w = spf::io::waypoints_from_json(spf::io::read_json_file(waypoints));
      if (smoothness >= 0) w.smoothness = smoothness;
      const auto path = spf::io::fit(w);
      emit(out, spf::io::to_json(path).dump(2) + "\n");
      std::cerr << "fitted " << path.size() << " segments of degree " << path.segment(0).degree() << "\n";
      return ok;
    }
    if (*check) {
      const auto path = load_path(input);
      const auto r = spf::check_assumptions(path, grid);
      const json j = {{"segments", path.size()},
                      {"closed", path.closed()},
                      {"frame", spf::io::to_json(path.frame_policy())},
                      {"smooth_ok", r.smooth_ok},
                      {"framed_ok", r.framed_ok},
                      {"worst_junction_error", r.worst_junction_error},
                      {"worst_junction", r.worst_junction},
                      {"worst_junction_order", r.worst_junction_order},
                      {"min_gram_determinant", r.min_gram_determinant},
                      {"worst_segment", r.worst_segment},
                      {"worst_lambda", r.worst_lambda},
                      {"total_length", path.total_length()}};
      std::cout << j.dump(2) << "\n";
      return ok;
    }
    if (*project) {
      const auto path = load_path(input);
      std::ostringstream csv;
      csv << "index,k_star,lambda_star,distance,eta1,iterations\n";
      const spf::ProjectionConfig cfg;
      const auto pts = load_points(points_file);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].size() != path.dim()) throw spf::Error(spf::ErrorCode::invalid_config, "point dimension differs from path");
        const auto s = spf::global_initialize(path, pts[i], cfg);
        const double dist = (pts[i] - path.segment(s.k_star).derivative(s.lambda_star, 0)).norm();
        csv << i << ',' << s.k_star << ',' << spf::io::fmt17(s.lambda_star) << ',' << spf::io::fmt17(dist) << ','
            << spf::io::fmt17(spf::arclength(path, s.k_star, s.lambda_star).eta1()) << ',' << s.last_iterations << '\n';
      }
      emit(out, csv.str());
      return ok;
    }
    if (*dlambda) {
      const auto path = load_path(input);
      std::ostringstream csv;
      csv << "k,lambda_star,delta_lambda\n";
      for (int k = 0; k < path.size(); ++k) {
        const auto t = spf::allowable_delta_lambda(path, k, samples, scan);
        for (std::size_t i = 0; i < t.delta.size(); ++i) {
          csv << k << ',' << spf::io::fmt17(t.lambda_star[i]) << ',' << spf::io::fmt17(t.delta[i]) << '\n';
        }
      }
      emit(out, csv.str());
      return ok;
    }
    if (*run) {
      const auto sf = load_scenario(input, overrides);
      spf::RunLog log;
      int code = ok;
      try {
        log = spf::run(sf.scenario);
      } catch (const spf::RunAborted& e) {
        std::cerr << "run aborted: " << e.what() << "\n";
        log = e.log();
        code = runtime;
      }
      std::ostringstream csv;
      spf::io::write_log_csv(csv, log);
      emit(out, csv.str());
      if (!summary.empty()) spf::io::write_text_file(summary, spf::io::summary_json(log).dump(2) + "\n");
      return code;
    }
    if (*portrait) {
      const auto sf = load_scenario(input, overrides);
      if (!sf.portrait) throw spf::Error(spf::ErrorCode::invalid_config, "scenario has no portrait block");
      const auto sys = spf::make_system(sf.scenario.plant, sf.scenario.plant_params);
      const auto pp = spf::zero_dynamics_portrait(sys, sf.scenario, *sf.portrait);
      std::ostringstream csv;
      spf::io::write_portrait_csv(csv, pp);
      emit(out, csv.str());
      const std::string eq = spf::io::portrait_json(pp).dump(2) + "\n";
      if (equilibria.empty()) {
        std::cerr << eq;
      } else {
        spf::io::write_text_file(equilibria, eq);
      }
      return ok;
    }
  } catch (const spf::Error& e) {
    std::cerr << "error [" << spf::to_string(e.code()) << "]: " << e.what() << "\n";
    return is_validation(e.code()) ? invalid : runtime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime;
  }
  return invalid;
}
