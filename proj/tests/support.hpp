#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "jointpred/config_io.hpp"
#include "jointpred/pipeline.hpp"
#include "jointpred/synth.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("jointpred_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Small cohort that keeps a full run to a few seconds.
inline jointpred::synth::CohortSpec small_spec(std::uint64_t seed, std::size_t n = 80) {
    jointpred::synth::CohortSpec s;
    s.n_participants = n;
    s.days = 5;
    s.social_columns = 40;
    s.feature_missing_rate = 0.05;
    s.modality_missing_rate = 0.1;
    s.seed = seed;
    return s;
}

inline jointpred::PipelineConfig fast_config(std::uint64_t seed) {
    jointpred::PipelineConfig c;
    c.seed = seed;
    c.forest_trees = 10;
    c.gemm_restarts = 3;
    c.gemm_iterations = 20;
    c.bootstrap_resamples = 200;
    c.hon_orders = {1, 2};
    c.candidate_families = {"ols", "ridge", "cart", "random_forest"};
    return c;
}

inline int run_cli(const std::string& args, const fs::path& log) {
    std::string cmd = std::string(JOINTPRED_CLI) + " " + args + " > " + log.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testing
