// jointpred: synth | run | predict | report

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointpred/cohort.hpp"
#include "jointpred/config_io.hpp"
#include "jointpred/ensemble.hpp"
#include "jointpred/persist.hpp"
#include "jointpred/pipeline.hpp"
#include "jointpred/report.hpp"
#include "jointpred/synth.hpp"

namespace fs = std::filesystem;
using namespace jointpred;

namespace {

struct Options {
    std::string config, data, out, spec, models, predictions, fusion_mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> participants;
    bool skip_proxy = false;
};

void write_error_record(const std::string& out_dir, const std::string& kind, const std::string& message) {
    nlohmann::json rec = {{"error", kind}, {"message", message}};
    std::cerr << rec.dump() << '\n';
    if (out_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream f(fs::path(out_dir) / "error.json");
    if (f) f << rec.dump(1) << '\n';
}

int cmd_synth(const Options& o) {
    synth::CohortSpec spec;
    if (!o.spec.empty()) spec = synth::spec_from_json(persist::read_json(o.spec));
    if (o.seed) spec.seed = *o.seed;
    if (o.participants) spec.n_participants = *o.participants;
    auto g = synth::generate(spec);
    ingest::write_cohort(g.raw, o.out);
    std::cout << "wrote " << g.raw.participants().size() << " participants to " << o.out << '\n';
    return 0;
}

ValidatedConfig run_config(const Options& o) {
    PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config_file(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
    if (o.skip_proxy) cfg.proxy_pass = false;
    if (!o.fusion_mode.empty())
        cfg.fusion_mode = o.fusion_mode == "per_modality_mean" ? FusionMode::PerModalityMean : FusionMode::Feature;
    return validate_config(std::move(cfg));
}

int cmd_run(const Options& o) {
    auto cfg = run_config(o);
    auto raw = ingest::load_cohort(o.data, &cfg->construct_ranges);
    auto u = pipeline::build_universe(raw, cfg);
    auto result = ensemble::run_joint_model(u, cfg);
    auto ev = report::evaluate(u, result, cfg);
    report::write_reports(o.out, u, result, ev, cfg);
    std::cout << report::render_summary(result, ev);
    return 0;
}

int cmd_predict(const Options& o) {
    auto bundle = persist::load_models(o.models);
    auto cfg = validate_config(bundle.config);
    auto raw = ingest::load_cohort_for_prediction(o.data);
    auto u = pipeline::build_universe(raw, cfg);
    std::vector<std::size_t> rows(u.participants.size());
    std::iota(rows.begin(), rows.end(), 0);
    auto preds = persist::predict_all(bundle.constructs, bundle.preparation, u, rows, cfg);
    std::vector<std::string> header{"participant_id"};
    for (const auto& [id, p] : preds) header.push_back(std::string(construct_name(id)));
    std::vector<std::vector<std::string>> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::string> line{u.participants[r]};
        for (const auto& [id, p] : preds) line.push_back(csv::format_number(p[r]));
        out.push_back(std::move(line));
    }
    fs::create_directories(o.out);
    csv::write_file((fs::path(o.out) / "predictions.csv").string(), header, out);
    std::cout << "wrote predictions for " << rows.size() << " participants to " << o.out << '\n';
    return 0;
}

/// Scores a predictions file against ground truth, in the layout of an
/// external validation table.
int cmd_report(const Options& o) {
    auto truth = ingest::load_ground_truth((fs::path(o.data) / ingest::kGroundTruthFile).string());
    auto table = csv::read_file(o.predictions);
    auto pid_col = table.column("participant_id");
    if (!pid_col) throw SchemaError("participant_id", "missing in " + o.predictions);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        auto id = parse_construct(table.header[c]);
        if (!id) continue;
        std::vector<double> p, a;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            auto row = truth.row_index(table.rows[r][*pid_col]);
            if (!row) continue;
            auto t = truth.value(*row, *id);
            auto v = csv::parse_cell(table.rows[r][c], r + 1, table.header[c]);
            if (t && v) {
                p.push_back(*v);
                a.push_back(*t);
            }
        }
        if (p.empty()) continue;
        auto tau = p.size() >= 2 ? eval::kendall_tau(p, a) : std::nullopt;
        rows.push_back({table.header[c], std::to_string(p.size()), csv::format_number(eval::smape(p, a)),
                        csv::format_cell(tau)});
    }
    fs::create_directories(o.out);
    csv::write_file((fs::path(o.out) / "external_validation.csv").string(), {"construct", "n", "smape", "tau"}, rows);
    for (const auto& r : rows) std::cout << r[0] << " n=" << r[1] << " smape=" << r[2] << " tau=" << r[3] << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint prediction of survey constructs from multimodal sensing data"};
    app.require_subcommand(1);
    Options o;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort");
    synth_cmd->add_option("--spec", o.spec, "cohort spec (JSON)");
    synth_cmd->add_option("--out", o.out, "output data directory")->required();
    synth_cmd->add_option("--seed", o.seed, "generator seed");
    synth_cmd->add_option("--participants", o.participants, "cohort size");

    auto* run_cmd = app.add_subcommand("run", "fit, select and evaluate");
    run_cmd->add_option("--config", o.config, "pipeline config (JSON)");
    run_cmd->add_option("--data", o.data, "data directory")->required();
    run_cmd->add_option("--out", o.out, "output directory")->required();
    run_cmd->add_option("--seed", o.seed, "override the config seed");
    run_cmd->add_option("--workers", o.workers, "worker threads");
    run_cmd->add_flag("--skip-proxy-pass", o.skip_proxy, "disable the proxy pass");
    run_cmd->add_option("--fusion-mode", o.fusion_mode, "feature or per_modality_mean")
        ->check(CLI::IsMember({"feature", "per_modality_mean"}));

    auto* predict_cmd = app.add_subcommand("predict", "apply saved models to new data");
    predict_cmd->add_option("--models", o.models, "models directory of a run")->required();
    predict_cmd->add_option("--data", o.data, "new data directory")->required();
    predict_cmd->add_option("--out", o.out, "output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "score predictions against ground truth");
    report_cmd->add_option("--predictions", o.predictions, "predictions CSV")->required();
    report_cmd->add_option("--data", o.data, "directory holding ground_truth.csv")->required();
    report_cmd->add_option("--out", o.out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    diag::set_warning_sink([](const std::string& m) { std::cerr << "warning: " << m << '\n'; });
    try {
        if (*synth_cmd) return cmd_synth(o);
        if (*run_cmd) return cmd_run(o);
        if (*predict_cmd) return cmd_predict(o);
        if (*report_cmd) return cmd_report(o);
    } catch (const InvalidConfig& e) {
        write_error_record(o.out, e.kind(), e.what());
        return 2;
    } catch (const Error& e) {
        write_error_record(o.out, e.kind(), e.what());
        return 3;
    } catch (const std::exception& e) {
        write_error_record(o.out, "InternalError", e.what());
        return 4;
    }
    return 1;
}
