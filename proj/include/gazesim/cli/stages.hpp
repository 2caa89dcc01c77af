#pragma once

#include <string>

#include "gazesim/cli/config.hpp"

namespace gazesim {

// Pipeline stages. Each one owns a subdirectory of out_dir (data/, model/,
// sim/, fix/, saliency/, eval/, report/), reads its inputs from the earlier
// stages' subdirectories and finishes by writing a manifest.json there. A
// subdirectory that already has a manifest is complete and is never
// overwritten; a missing input manifest raises PrereqError naming the stage
// to run first.
void stage_gen(const Config& cfg, const std::string& out_dir);
void stage_train(const Config& cfg, const std::string& out_dir);
void stage_simulate(const Config& cfg, const std::string& out_dir);
void stage_fixate(const Config& cfg, const std::string& out_dir);
void stage_saliency(const Config& cfg, const std::string& out_dir);
void stage_evaluate(const Config& cfg, const std::string& out_dir);
void stage_report(const Config& cfg, const std::string& out_dir);

}  // namespace gazesim
