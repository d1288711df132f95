#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hgan_tsa/core/io.hpp"
#include "hgan_tsa/eval/metrics.hpp"
#include "hgan_tsa/eval/sweep.hpp"
#include "hgan_tsa/gan/level.hpp"
#include "hgan_tsa/hgan/model.hpp"

namespace hgan_tsa::eval {

// Report directory layout (comma-separated, one header line each):
//
//   confusion.csv          scope,true_positive,true_negative,false_positive,false_negative,total,accuracy
//   response_time.csv      samples,mean_seconds,response_cycles   (wall-clock, varies between runs)
//   sweep_<axis>.csv       setting,seeds,level_<k>_{mean,min,max}...,ensemble_{mean,min,max},error
//   training_summary.csv   level,episodes,converged,final_cross_entropy,final_squared_error
//   loss_level_<k>.csv     episode,cross_entropy,squared_error,adversarial,generator_loss,
//                          discriminator_loss,d_real,d_fake
//
// Every file except response_time.csv is a pure function of its inputs.

struct ReportInputs {
  std::optional<EvaluationResult> evaluation;
  std::optional<ConfusionMatrix> decision_tree;
  std::vector<SweepReport> sweeps;
  std::vector<std::vector<gan::StepMetrics>> loss_curves;  // per level
  std::vector<hgan::LevelSummary> summaries;               // per level, optional
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string confusion_row(const std::string& scope, const ConfusionMatrix& c) {
  return scope + "," + std::to_string(c.true_positive) + "," + std::to_string(c.true_negative) + "," +
         std::to_string(c.false_positive) + "," + std::to_string(c.false_negative) + "," + std::to_string(c.total()) +
         "," + fmt(c.accuracy()) + "\n";
}

inline std::string confusion_table(const EvaluationResult* ev, const ConfusionMatrix* tree) {
  std::string out = "scope,true_positive,true_negative,false_positive,false_negative,total,accuracy\n";
  if (ev) {
    for (std::size_t k = 0; k < ev->per_level.size(); ++k)
      out += confusion_row("level_" + std::to_string(k + 1), ev->per_level[k]);
    out += confusion_row("ensemble", ev->ensemble);
  }
  if (tree) out += confusion_row("decision_tree", *tree);
  return out;
}

inline std::string sweep_table(const SweepReport& rep) {
  std::string out = "setting,seeds";
  for (std::size_t k = 1; k <= rep.levels; ++k) {
    const auto p = "level_" + std::to_string(k);
    out += "," + p + "_mean," + p + "_min," + p + "_max";
  }
  out += ",ensemble_mean,ensemble_min,ensemble_max,error\n";
  const auto band_cells = [](const Band& b) { return "," + fmt(b.mean) + "," + fmt(b.min) + "," + fmt(b.max); };
  for (const auto& pt : rep.points) {
    out += pt.setting + "," + std::to_string(rep.seeds.size());
    if (pt.error.empty()) {
      for (const auto& b : pt.per_level) out += band_cells(b);
      out += band_cells(pt.ensemble) + ",\n";
    } else {
      for (std::size_t i = 0; i < 3 * (rep.levels + 1); ++i) out += ",";
      std::string msg = pt.error;
      for (auto& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      out += "," + msg + "\n";
    }
  }
  return out;
}

inline std::string loss_curve(const std::vector<gan::StepMetrics>& history) {
  std::string out = "episode,cross_entropy,squared_error,adversarial,generator_loss,discriminator_loss,d_real,d_fake\n";
  for (const auto& m : history)
    out += std::to_string(m.episode) + "," + fmt(m.cross_entropy) + "," + fmt(m.squared_error) + "," +
           fmt(m.adversarial) + "," + fmt(m.generator_loss) + "," + fmt(m.discriminator_loss) + "," + fmt(m.d_real) +
           "," + fmt(m.d_fake) + "\n";
  return out;
}

inline std::string training_summary(const ReportInputs& in) {
  std::string out = "level,episodes,converged,final_cross_entropy,final_squared_error\n";
  for (std::size_t k = 0; k < in.loss_curves.size(); ++k) {
    const auto& h = in.loss_curves[k];
    const auto episodes = k < in.summaries.size() ? in.summaries[k].episodes : h.size();
    const bool conv = k < in.summaries.size() && in.summaries[k].converged;
    out += std::to_string(k + 1) + "," + std::to_string(episodes) + "," + (conv ? "true" : "false") + "," +
           (h.empty() ? std::string() : fmt(h.back().cross_entropy)) + "," +
           (h.empty() ? std::string() : fmt(h.back().squared_error)) + "\n";
  }
  return out;
}

/// Writes every table the inputs provide and returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const ReportInputs& in, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto put = [&](const std::string& name, const std::string& text) {
    write_file_text(dir / name, text);
    written.push_back(dir / name);
  };
  if (in.evaluation || in.decision_tree)
    put("confusion.csv", confusion_table(in.evaluation ? &*in.evaluation : nullptr,
                                         in.decision_tree ? &*in.decision_tree : nullptr));
  if (in.evaluation)
    put("response_time.csv", "samples,mean_seconds,response_cycles\n" + std::to_string(in.evaluation->samples) + "," +
                                 fmt(in.evaluation->mean_response_seconds) + "," +
                                 fmt(in.evaluation->response_cycles) + "\n");
  for (const auto& s : in.sweeps) put(std::string("sweep_") + to_string(s.axis) + ".csv", sweep_table(s));
  if (!in.loss_curves.empty()) put("training_summary.csv", training_summary(in));
  for (std::size_t k = 0; k < in.loss_curves.size(); ++k)
    put("loss_level_" + std::to_string(k + 1) + ".csv", loss_curve(in.loss_curves[k]));
  return written;
}

}  // namespace hgan_tsa::eval
