#pragma once

// Evaluation of a joint-model run and the plain-text/CSV report files.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "jointpred/config_io.hpp"
#include "jointpred/ensemble.hpp"
#include "jointpred/eval.hpp"
#include "jointpred/persist.hpp"

namespace jointpred::report {

struct FoldMetrics {
    int fold = 0;
    std::optional<double> smape, tau, gemm_tau, baseline_smape;
};

struct ConstructMetrics {
    ConstructId id = ConstructId::IRB;
    std::vector<FoldMetrics> folds;
    std::optional<double> pooled_smape, pooled_baseline_smape, pooled_tau;
    std::optional<double> validation_smape, validation_tau;
    std::optional<eval::ReliabilitySummary> reliability;
};

struct DeltaRow {
    int fold = 0;
    std::optional<double> model_tau, theory_tau;
};

struct Evaluation {
    std::vector<ConstructMetrics> constructs;
    std::map<ConstructId, std::vector<DeltaRow>> delta_rows;
    std::map<ConstructId, eval::DeltaTauSummary> delta;
    eval::DiscriminantMatrix discriminant;
};

namespace detail {

inline std::optional<double> tau_of(const std::vector<double>& p, const std::vector<double>& a) {
    return p.size() >= 2 ? eval::kendall_tau(p, a) : std::nullopt;
}

/// Theory predictor for one fold: monotone composite of the ground-truth
/// personality and cognitive-ability columns, weights fitted on the training
/// folds and scored on the held fold.
inline std::optional<double> theory_tau(const pipeline::Universe& u, const ensemble::RunResult& r, ConstructId target,
                                        int fold, const ValidatedConfig& cfg) {
    auto rows_for = [&](bool held) {
        std::vector<std::size_t> rows;
        for (std::size_t p = 0; p < r.split.train.size(); ++p) {
            if ((r.plan.fold_of[p] == fold) != held) continue;
            const auto row = r.split.train[p];
            bool ok = u.truth.value(row, target).has_value();
            for (auto t : kTheoryConstructs) ok = ok && u.truth.value(row, t).has_value();
            if (ok) rows.push_back(row);
        }
        return rows;
    };
    auto design = [&](const std::vector<std::size_t>& rows, Eigen::MatrixXd& x, std::vector<double>& y) {
        x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kTheoryConstructs.size()));
        y.clear();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < kTheoryConstructs.size(); ++j)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *u.truth.value(rows[i], kTheoryConstructs[j]);
            y.push_back(*u.truth.value(rows[i], target));
        }
    };
    auto tr = rows_for(false), te = rows_for(true);
    if (tr.size() < 3 || te.size() < 2) return std::nullopt;
    Eigen::MatrixXd xtr, xte;
    std::vector<double> ytr, yte;
    design(tr, xtr, ytr);
    design(te, xte, yte);
    eval::GemmConfig gc{cfg->gemm_restarts, cfg->gemm_iterations,
                        derive_seed(cfg->seed, {8, index_of(target), static_cast<std::uint64_t>(fold)})};
    auto fit = eval::gemm_fit(xtr, ytr, gc);
    return eval::kendall_tau(fit.composite(xte), yte);
}

}  // namespace detail

/// Predictions for every universe row: out-of-fold for training rows and the
/// validation prediction for held-out rows.
inline std::vector<std::optional<double>> combined_predictions(const ensemble::RunResult& r, ConstructId id) {
    std::vector<std::optional<double>> out(r.participants.size());
    auto it = r.runs.find(id);
    if (it == r.runs.end() || !it->second.ok) return out;
    for (std::size_t p = 0; p < r.split.train.size(); ++p) out[r.split.train[p]] = it->second.oof[p];
    for (std::size_t v = 0; v < r.split.validation.size(); ++v) out[r.split.validation[v]] = it->second.validation[v];
    return out;
}

inline Evaluation evaluate(const pipeline::Universe& u, const ensemble::RunResult& r, const ValidatedConfig& cfg) {
    Evaluation ev;
    const int K = r.plan.k;
    for (auto id : r.modeled) {
        const auto& run = r.runs.at(id);
        ConstructMetrics cm;
        cm.id = id;
        if (run.ok) {
            const auto& chosen = run.chosen();
            std::vector<double> taus_all;
            std::vector<std::optional<double>> fold_taus;
            for (int f = 0; f < K; ++f) {
                const auto& fs = chosen.folds[static_cast<std::size_t>(f)];
                FoldMetrics fm{f, fs.smape, fs.tau, std::nullopt, run.baseline_smape[static_cast<std::size_t>(f)]};
                // With one predicted column per construct the composite score
                // reduces to the raw rank correlation.
                if (fs.tau) {
                    const auto members = r.plan.members(f);
                    std::vector<double> p, a;
                    for (auto pos : members)
                        if (auto t = u.truth.value(r.split.train[pos], id); t && run.oof[pos]) {
                            p.push_back(*run.oof[pos]);
                            a.push_back(*t);
                        }
                    Eigen::MatrixXd x = Eigen::Map<Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
                    fm.gemm_tau = eval::gemm_tau(x, a);
                }
                fold_taus.push_back(fs.tau);
                cm.folds.push_back(fm);
            }
            std::vector<double> p, a, base;
            std::vector<double> fold_mean(static_cast<std::size_t>(K), 0.0);
            for (int f = 0; f < K; ++f) {
                std::vector<double> seen;
                for (std::size_t pos = 0; pos < r.split.train.size(); ++pos)
                    if (r.plan.fold_of[pos] != f)
                        if (auto t = u.truth.value(r.split.train[pos], id)) seen.push_back(*t);
                if (!seen.empty()) fold_mean[static_cast<std::size_t>(f)] = eval::expected_value_baseline(seen).value;
            }
            for (std::size_t pos = 0; pos < r.split.train.size(); ++pos)
                if (auto t = u.truth.value(r.split.train[pos], id); t && run.oof[pos]) {
                    p.push_back(*run.oof[pos]);
                    a.push_back(*t);
                    base.push_back(fold_mean[static_cast<std::size_t>(r.plan.fold_of[pos])]);
                }
            if (!p.empty()) {
                cm.pooled_smape = eval::smape(p, a);
                cm.pooled_baseline_smape = eval::smape(base, a);
                cm.pooled_tau = detail::tau_of(p, a);
            }
            p.clear();
            a.clear();
            for (std::size_t v = 0; v < r.split.validation.size(); ++v)
                if (auto t = u.truth.value(r.split.validation[v], id)) {
                    p.push_back(run.validation[v]);
                    a.push_back(*t);
                }
            if (!p.empty()) {
                cm.validation_smape = eval::smape(p, a);
                cm.validation_tau = detail::tau_of(p, a);
            }
            cm.reliability = eval::reliability_report(fold_taus, cfg->bootstrap_resamples,
                                                      derive_seed(cfg->seed, {7, index_of(id)}));
        }
        ev.constructs.push_back(std::move(cm));
    }

    for (auto id : kJobConstructs) {
        auto it = r.runs.find(id);
        if (it == r.runs.end() || !it->second.ok) continue;
        std::vector<DeltaRow> rows;
        std::vector<double> m, t;
        for (int f = 0; f < K; ++f) {
            DeltaRow d{f, it->second.chosen().folds[static_cast<std::size_t>(f)].tau, detail::theory_tau(u, r, id, f, cfg)};
            if (d.model_tau && d.theory_tau) {
                m.push_back(*d.model_tau);
                t.push_back(*d.theory_tau);
            }
            rows.push_back(d);
        }
        ev.delta_rows[id] = rows;
        if (!m.empty()) ev.delta[id] = eval::delta_tau(m, t);
    }

    eval::ConstructColumns preds, truths;
    for (auto id : kAllConstructs) {
        std::vector<std::optional<double>> tv;
        for (std::size_t row = 0; row < u.participants.size(); ++row) tv.push_back(u.truth.value(row, id));
        truths[id] = std::move(tv);
        if (r.runs.count(id) && r.runs.at(id).ok) preds[id] = combined_predictions(r, id);
    }
    ev.discriminant = eval::discriminant_matrix(preds, truths);
    return ev;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

namespace detail {

using csv::format_cell;
using csv::format_number;

inline std::string name(ConstructId id) { return std::string(construct_name(id)); }

inline std::string fixed(std::optional<double> v, int digits) {
    if (!v) return "-";
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << *v;
    return s.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
}

}  // namespace detail

inline std::string render_summary(const ensemble::RunResult& r, const Evaluation& ev) {
    using detail::fixed;
    std::ostringstream s;
    s << "Performance (out-of-fold, training participants)\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %10s %10s %8s %8s %8s %8s\n", "construct", "smape", "baseline", "tau",
                  "tau_min", "tau_max", "val_tau");
    s << line;
    for (const auto& c : ev.constructs) {
        std::snprintf(line, sizeof line, "%-24s %10s %10s %8s %8s %8s %8s\n", detail::name(c.id).c_str(),
                      fixed(c.pooled_smape, 2).c_str(), fixed(c.pooled_baseline_smape, 2).c_str(),
                      fixed(c.reliability ? std::optional(c.reliability->mean) : std::nullopt, 3).c_str(),
                      fixed(c.reliability ? std::optional(c.reliability->min) : std::nullopt, 3).c_str(),
                      fixed(c.reliability ? std::optional(c.reliability->max) : std::nullopt, 3).c_str(),
                      fixed(c.validation_tau, 3).c_str());
        s << line;
    }
    s << "\nIncremental validity over personality and cognitive ability (per fold)\n";
    std::snprintf(line, sizeof line, "%-24s %10s %10s %10s %10s\n", "construct", "model_tau", "theory_tau", "mean_dtau",
                  "frac_pos");
    s << line;
    for (const auto& [id, d] : ev.delta) {
        double mt = 0, tt = 0;
        std::size_t n = 0;
        for (const auto& row : ev.delta_rows.at(id))
            if (row.model_tau && row.theory_tau) {
                mt += *row.model_tau;
                tt += *row.theory_tau;
                ++n;
            }
        std::snprintf(line, sizeof line, "%-24s %10s %10s %10s %10s\n", detail::name(id).c_str(),
                      fixed(n ? std::optional(mt / double(n)) : std::nullopt, 3).c_str(),
                      fixed(n ? std::optional(tt / double(n)) : std::nullopt, 3).c_str(), fixed(d.mean, 3).c_str(),
                      fixed(d.fraction_positive, 2).c_str());
        s << line;
    }
    s << "\nSelected components\n";
    for (auto id : r.modeled) {
        const auto& run = r.runs.at(id);
        s << "  " << detail::name(id) << ": "
          << (run.ok ? run.chosen().spec.label() + " (pass " + std::to_string(run.pass) + ")" : std::string("none")) << '\n';
    }
    return s.str();
}

inline std::string render_manifest(const ensemble::RunResult& r, const ValidatedConfig& cfg, const pipeline::Universe& u) {
    std::ostringstream s;
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg.get())));
    s << "seed: " << cfg->seed << '\n';
    s << "config_hash: " << hash << '\n';
    s << "participants: " << u.participants.size() << '\n';
    s << "training: " << r.split.train.size() << '\n';
    s << "validation: " << r.split.validation.size() << '\n';
    s << "folds: " << r.plan.k << '\n';
    s << "fold_sizes:";
    for (auto n : r.plan.sizes()) s << ' ' << n;
    s << '\n';
    s << "fusion_mode: " << fusion_mode_name(cfg->fusion_mode) << '\n';
    s << "proxy_pass: " << (cfg->proxy_pass ? "on" : "off") << '\n';
    s << "modalities:";
    for (auto m : u.modalities()) s << ' ' << modality_name(m);
    s << '\n';
    s << "rejected_samples: " << u.rejects.size() << '\n';
    s << "selection:\n";
    for (auto id : r.modeled) {
        const auto& run = r.runs.at(id);
        s << "  " << construct_name(id) << " pass=" << run.pass;
        if (run.ok)
            s << " component=" << run.chosen().spec.label() << " score=" << csv::format_number(run.chosen().score)
              << " features=" << run.final_recipe.width() << " proxy=" << run.final_recipe.proxy.features.size();
        else
            s << " component=none";
        if (auto fp = r.first_pass.find(id); fp != r.first_pass.end() && fp->second.ok && run.pass == 2)
            s << " first_pass=" << fp->second.chosen().spec.label();
        s << '\n';
    }
    return s.str();
}

/// Writes every report file into `dir`.
inline void write_reports(const std::filesystem::path& dir, const pipeline::Universe& u, const ensemble::RunResult& r,
                          const Evaluation& ev, const ValidatedConfig& cfg) {
    namespace fs = std::filesystem;
    using detail::format_cell;
    using detail::format_number;
    using detail::name;
    fs::create_directories(dir);
    auto path = [&](const char* f) { return (dir / f).string(); };

    std::vector<std::vector<std::string>> rows;
    for (const auto& c : ev.constructs)
        for (const auto& f : c.folds)
            rows.push_back({name(c.id), std::to_string(f.fold), format_cell(f.smape), format_cell(f.tau),
                            format_cell(f.gemm_tau), format_cell(f.baseline_smape)});
    csv::write_file(path("metrics.csv"), {"construct", "fold", "smape", "tau", "gemm_tau", "baseline_smape"}, rows);

    rows.clear();
    for (const auto& c : ev.constructs)
        if (c.reliability)
            rows.push_back({name(c.id), format_number(c.reliability->min), format_number(c.reliability->max),
                            format_number(c.reliability->mean), format_number(c.reliability->ci_lo),
                            format_number(c.reliability->ci_hi)});
    csv::write_file(path("reliability.csv"), {"construct", "min", "max", "mean", "ci_lo", "ci_hi"}, rows);

    rows.clear();
    for (auto a : kAllConstructs)
        for (auto b : kAllConstructs) {
            if (a == b) continue;
            const auto& cell = ev.discriminant.at(a, b);
            rows.push_back({name(a), name(b), index_of(a) < index_of(b) ? "prediction" : "ground_truth",
                            format_cell(cell.r), std::to_string(cell.n), cell.r ? format_number(cell.p_value) : "",
                            cell.stars()});
        }
    csv::write_file(path("discriminant.csv"), {"row", "col", "triangle", "r", "n", "p_value", "stars"}, rows);

    rows.clear();
    for (const auto& [id, drows] : ev.delta_rows)
        for (const auto& d : drows)
            rows.push_back({name(id), std::to_string(d.fold), format_cell(d.model_tau), format_cell(d.theory_tau),
                            d.model_tau && d.theory_tau ? format_number(*d.model_tau - *d.theory_tau) : ""});
    csv::write_file(path("delta_tau.csv"), {"construct", "fold", "model_tau", "theory_tau", "delta_tau"}, rows);

    detail::write_text(dir / "summary.txt", render_summary(r, ev));
    detail::write_text(dir / "manifest.txt", render_manifest(r, cfg, u));

    // Predictions.
    {
        std::vector<std::string> header{"participant_id", "fold"};
        for (auto id : r.modeled) header.push_back(name(id));
        rows.clear();
        for (std::size_t p = 0; p < r.split.train.size(); ++p) {
            std::vector<std::string> row{u.participants[r.split.train[p]], std::to_string(r.plan.fold_of[p])};
            for (auto id : r.modeled) row.push_back(r.runs.at(id).ok ? format_cell(r.runs.at(id).oof[p]) : "");
            rows.push_back(std::move(row));
        }
        csv::write_file(path("predictions_oof.csv"), header, rows);
        header.erase(header.begin() + 1);
        rows.clear();
        for (std::size_t v = 0; v < r.split.validation.size(); ++v) {
            std::vector<std::string> row{u.participants[r.split.validation[v]]};
            for (auto id : r.modeled) row.push_back(r.runs.at(id).ok ? format_number(r.runs.at(id).validation[v]) : "");
            rows.push_back(std::move(row));
        }
        csv::write_file(path("predictions_validation.csv"), header, rows);
    }

    // Candidate tables and the fold predictions the scores come from.
    {
        std::vector<std::vector<std::string>> preds;
        rows.clear();
        auto log_run = [&](const ensemble::ConstructRun& run) {
            for (const auto& c : run.candidates)
                for (std::size_t f = 0; f < c.folds.size(); ++f) {
                    const auto& fs = c.folds[f];
                    rows.push_back({name(run.id), std::to_string(run.pass), c.spec.label(), std::to_string(f),
                                    format_cell(fs.tau), format_cell(fs.smape), format_cell(fs.accuracy),
                                    fs.failed ? "failed" : "ok", format_number(c.score)});
                    if (fs.failed) continue;
                    const auto members = r.plan.members(static_cast<int>(f));
                    for (std::size_t i = 0; i < members.size(); ++i)
                        preds.push_back({name(run.id), std::to_string(run.pass), c.spec.label(), std::to_string(f),
                                         u.participants[r.split.train[members[i]]], format_number(c.predictions[f][i])});
                }
        };
        for (auto id : r.modeled) {
            if (auto fp = r.first_pass.find(id); fp != r.first_pass.end() && r.runs.at(id).pass == 2) log_run(fp->second);
            log_run(r.runs.at(id));
        }
        csv::write_file(path("candidates.csv"),
                        {"construct", "pass", "candidate", "fold", "tau", "smape", "accuracy", "status", "score"}, rows);
        csv::write_file(path("candidate_predictions.csv"),
                        {"construct", "pass", "candidate", "fold", "participant_id", "prediction"}, preds);
    }

    // Masks.
    rows.clear();
    auto log_recipe = [&](ConstructId id, int pass, const std::string& fold, const ensemble::FusionRecipe& rec) {
        for (const auto& b : rec.blocks)
            for (std::size_t i = 0; i < b.mask.features.size(); ++i)
                rows.push_back({name(id), std::to_string(pass), fold, std::string(modality_name(b.modality)),
                                std::to_string(i + 1), b.mask.features[i].name, format_number(b.mask.features[i].score)});
        for (std::size_t i = 0; i < rec.proxy.features.size(); ++i)
            rows.push_back({name(id), std::to_string(pass), fold, "Proxy", std::to_string(i + 1), rec.proxy.features[i].name,
                            format_number(rec.proxy.features[i].score)});
    };
    for (auto id : r.modeled) {
        const auto& run = r.runs.at(id);
        for (std::size_t f = 0; f < run.fold_recipes.size(); ++f) log_recipe(id, run.pass, std::to_string(f), run.fold_recipes[f]);
        log_recipe(id, run.pass, "final", run.final_recipe);
    }
    csv::write_file(path("masks.csv"), {"construct", "pass", "fold", "modality", "rank", "feature", "score"}, rows);

    rows.clear();
    for (const auto& [src, choice] : r.inner_proxy_choice)
        for (std::size_t f = 0; f < choice.size(); ++f)
            rows.push_back({name(src), std::to_string(f), r.first_pass.at(src).candidates[choice[f]].spec.label()});
    csv::write_file(path("proxy_selection.csv"), {"source", "outer_fold", "candidate"}, rows);

    // PCA loadings of the final preparation.
    rows.clear();
    auto log_pca = [&](const std::string& block, const reduce::PcaModel& p) {
        for (Eigen::Index c = 0; c < p.components.rows(); ++c)
            for (Eigen::Index j = 0; j < p.components.cols(); ++j)
                rows.push_back({block, std::to_string(c + 1), format_number(p.explained_variance_ratio[static_cast<std::size_t>(c)]),
                                p.columns[static_cast<std::size_t>(j)], format_number(p.components(c, j))});
    };
    if (r.final_prep.social_pca) log_pca("SocialMedia", *r.final_prep.social_pca);
    for (const auto& [m, h] : r.final_prep.hon)
        if (h.embedding.pca) log_pca(std::string(modality_name(m)), *h.embedding.pca);
    csv::write_file(path("pca_loadings.csv"), {"block", "component", "explained_variance_ratio", "feature", "loading"}, rows);

    rows.clear();
    for (const auto& a : r.audit) rows.push_back({a.participant, a.feature, a.strategy, format_number(a.value)});
    csv::write_file(path("imputation_audit.csv"), {"participant_id", "feature", "strategy", "value"}, rows);

    rows.clear();
    for (const auto& rej : u.rejects)
        rows.push_back({rej.participant, rej.signal, rej.t ? format_timestamp(*rej.t) : "", format_number(rej.value), rej.reason});
    csv::write_file(path("rejects.csv"), {"participant_id", "signal", "timestamp", "value", "reason"}, rows);

    persist::write_json(config_to_json(cfg.get()), dir / "config.json");
    persist::save_models(r, cfg, dir / "models");
}

}  // namespace jointpred::report
