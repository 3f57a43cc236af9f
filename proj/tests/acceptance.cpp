// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
//   acceptance [--only N,N,...] [--seeds N]

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "jointpred/cohort.hpp"
#include "jointpred/ensemble.hpp"
#include "jointpred/eval.hpp"
#include "jointpred/hon.hpp"
#include "jointpred/impute.hpp"
#include "jointpred/models.hpp"
#include "jointpred/report.hpp"
#include "leakage.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace jointpred;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
}

// ---------------------------------------------------------------------------

Outcome hon_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::size_t probs = 0, contexts = 0, bad = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int alphabet = 1 + static_cast<int>(rng() % 5);
        const int order = 1 + static_cast<int>(rng() % 3);
        const std::size_t len = static_cast<std::size_t>(order) + 1 + rng() % (200 - static_cast<std::uint64_t>(order));
        std::vector<int> seq(len);
        for (auto& s : seq) s = static_cast<int>(rng() % static_cast<std::uint64_t>(alphabet));
        auto m = hon::build_hon(hon::DiscreteSeries{"p", 30, {seq}}, order);
        auto expect = oracle::hon_probabilities(seq, order);
        if (m.counts.size() != expect.size()) ++bad;
        for (const auto& [ctx, nexts] : expect) {
            double total = 0.0;
            for (const auto& [nx, p] : nexts) {
                double got = m.probability(ctx, nx);
                worst = std::max(worst, std::abs(got - p));
                total += got;
                ++probs;
            }
            worst = std::max(worst, std::abs(total - 1.0));
            ++contexts;
        }
        for (const auto& [ctx, nexts] : m.counts)
            if (!expect.count(ctx)) ++bad;
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && worst <= 1e-12 && secs < 30.0,
            std::to_string(probs) + " probabilities over " + std::to_string(contexts) + " contexts, max error " +
                std::to_string(worst) + ", " + fmt(secs, 2) + " s"};
}

Outcome kendall_oracle() {
    std::mt19937_64 rng(77);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 499;
        const auto levels_x = 2 + rng() % 20, levels_y = 2 + rng() % 20;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = double(rng() % levels_x);
            y[i] = double(rng() % levels_y) * 0.5;
        }
        auto fast = eval::kendall_tau(x, y);
        auto slow = oracle::kendall_tau_b(x, y);
        if (fast.has_value() != slow.has_value() || (fast && *fast != *slow)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(200 - mismatches) + "/200 vectors identical to pair enumeration"};
}

Outcome leakage_suite() {
    auto g = synth::generate(testing::small_spec(101, 110));
    auto c = testing::fast_config(101);
    c.candidate_families.clear();
    c.forest_trees = 20;
    auto cfg = validate_config(c);
    auto u = pipeline::build_universe(g.raw, cfg);
    auto base = ensemble::run_joint_model(u, cfg);

    std::vector<leakage::Finding> all;
    int checks = 0;
    auto add = [&](std::vector<leakage::Finding> f) {
        ++checks;
        all.insert(all.end(), f.begin(), f.end());
    };
    for (std::size_t k = 0; k < 2; ++k) {
        const auto v = base.split.validation[k * 7];
        auto pu = u;
        leakage::perturb_features(pu, v);
        leakage::perturb_truth(pu, v, cfg);
        auto r = ensemble::run_joint_model(pu, cfg);
        add(leakage::compare_runs(base, r, -1, false, 0, false));
        for (const auto& [id, run] : base.runs)
            for (std::size_t i = 0; i < run.validation.size(); ++i)
                if (i != k * 7 && run.validation[i] != r.runs.at(id).validation[i])
                    all.push_back({"validation prediction of another participant changed"});
    }
    for (int fold = 0; fold < base.plan.k; ++fold) {
        const auto pos = base.plan.members(fold)[static_cast<std::size_t>(fold) % 3];
        auto tu = u;
        leakage::perturb_truth(tu, base.split.train[pos], cfg);
        add(leakage::compare_runs(base, ensemble::run_joint_model(tu, cfg), fold, true, pos, true));
        auto fu = u;
        leakage::perturb_features(fu, base.split.train[pos]);
        add(leakage::compare_runs(base, ensemble::run_joint_model(fu, cfg), fold, false, pos, true));
    }
    std::string detail = std::to_string(checks) + " perturbations, " + std::to_string(all.size()) + " differences";
    if (!all.empty()) detail += " (first: " + all.front().what + ")";
    return {all.empty(), detail};
}

// ---------------------------------------------------------------------------
// Synthetic-cohort patterns

const std::array<ConstructId, 4> kNullConstructs = {ConstructId::PositiveAffect, ConstructId::Anxiety,
                                                    ConstructId::Tobacco, ConstructId::Sleep};

bool is_null(ConstructId id) {
    return std::find(kNullConstructs.begin(), kNullConstructs.end(), id) != kNullConstructs.end();
}

struct SeedRun {
    std::uint64_t seed = 0;
    double seconds = 0.0;
    report::Evaluation ev;
    std::size_t emitted = 0, out_of_range = 0;
};

std::size_t count_out_of_range(const ensemble::RunResult& r, const ValidatedConfig& cfg, std::size_t& emitted) {
    std::size_t bad = 0;
    auto check = [&](ConstructId id, double v) {
        ++emitted;
        auto rg = cfg->construct_ranges.at(id);
        if (!(v >= rg.lo && v <= rg.hi)) ++bad;
    };
    for (const auto* runs : {&r.runs, &r.first_pass})
        for (const auto& [id, run] : *runs) {
            for (const auto& v : run.oof)
                if (v) check(id, *v);
            for (double v : run.validation) check(id, v);
            for (const auto& c : run.candidates)
                for (const auto& fold : c.predictions)
                    for (double v : fold) check(id, v);
        }
    return bad;
}

SeedRun pattern_run(std::uint64_t seed, synth::LatentLayout layout) {
    const auto t0 = Clock::now();
    synth::CohortSpec spec;
    spec.n_participants = 500;
    spec.layout = layout;
    spec.default_snr = 2.0;
    spec.feature_missing_rate = 0.05;
    spec.modality_missing_rate = 0.1;
    spec.seed = seed;
    if (layout == synth::LatentLayout::Default)
        for (auto id : kNullConstructs) spec.snr[id] = 0.0;
    auto g = synth::generate(spec);
    PipelineConfig c;
    c.seed = seed;
    auto cfg = validate_config(c);
    auto u = pipeline::build_universe(g.raw, cfg);
    auto r = ensemble::run_joint_model(u, cfg);
    SeedRun out;
    out.seed = seed;
    out.ev = report::evaluate(u, r, cfg);
    out.out_of_range = count_out_of_range(r, cfg, out.emitted);
    out.seconds = seconds_since(t0);
    return out;
}

Outcome baseline_dominance(const std::vector<SeedRun>& runs) {
    int strict_smape = 0, strict_null = 0;
    std::map<ConstructId, int> per_construct;
    double slowest = 0.0;
    std::ostringstream misses;
    for (const auto& s : runs) {
        slowest = std::max(slowest, s.seconds);
        bool all_smape = true, all_null = true;
        for (const auto& cm : s.ev.constructs) {
            bool ok;
            if (is_null(cm.id)) {
                ok = cm.pooled_tau && std::abs(*cm.pooled_tau) < 0.1;
                all_null = all_null && ok;
                if (!ok) misses << " seed " << s.seed << " " << construct_name(cm.id) << " tau=" << fmt(cm.pooled_tau.value_or(NAN));
            } else {
                ok = cm.pooled_smape && cm.pooled_baseline_smape && *cm.pooled_smape < *cm.pooled_baseline_smape;
                all_smape = all_smape && ok;
                if (!ok)
                    misses << " seed " << s.seed << " " << construct_name(cm.id) << " smape=" << fmt(cm.pooled_smape.value_or(NAN), 2)
                           << " vs " << fmt(cm.pooled_baseline_smape.value_or(NAN), 2);
            }
            per_construct[cm.id] += ok;
        }
        strict_smape += all_smape;
        strict_null += all_null;
    }
    const double n = double(runs.size());
    int worst_construct = static_cast<int>(runs.size());
    for (const auto& [id, k] : per_construct) worst_construct = std::min(worst_construct, k);
    const bool pass = strict_smape >= 0.95 * n && strict_null >= 0.95 * n && slowest < 600.0;
    std::string detail = "seeds with every signal construct below baseline " + std::to_string(strict_smape) + "/" +
                         std::to_string(runs.size()) + ", seeds with every null |tau|<0.1 " + std::to_string(strict_null) +
                         "/" + std::to_string(runs.size()) + ", worst single construct " + std::to_string(worst_construct) +
                         "/" + std::to_string(runs.size()) + ", slowest seed " + fmt(slowest, 1) + " s";
    if (!misses.str().empty()) detail += ";" + misses.str();
    return {pass, detail};
}

Outcome incremental_validity(const std::vector<SeedRun>& runs) {
    int seeds_ok = 0;
    std::map<ConstructId, int> per_construct;
    std::ostringstream misses;
    for (const auto& s : runs) {
        bool all = true;
        for (auto id : kJobConstructs) {
            auto it = s.ev.delta.find(id);
            bool ok = it != s.ev.delta.end() && it->second.mean > 0.0 && it->second.fraction_positive > 0.5;
            per_construct[id] += ok;
            all = all && ok;
            if (!ok && it != s.ev.delta.end())
                misses << " seed " << s.seed << " " << construct_name(id) << " mean=" << fmt(it->second.mean)
                       << " frac=" << fmt(it->second.fraction_positive, 2);
        }
        seeds_ok += all;
    }
    std::string detail = "seeds with every job construct improving " + std::to_string(seeds_ok) + "/" +
                         std::to_string(runs.size()) + " (per construct:";
    for (const auto& [id, k] : per_construct) detail += " " + std::string(construct_name(id)) + "=" + std::to_string(k);
    detail += ")";
    if (!misses.str().empty()) detail += ";" + misses.str();
    return {seeds_ok >= 0.9 * double(runs.size()), detail};
}

Outcome discriminant_validity(const std::vector<SeedRun>& runs) {
    bool pass = true;
    std::string detail;
    double lo = 1.0, hi = -1.0;
    for (const auto& s : runs) {
        int inside = 0, cells = 0;
        for (std::size_t i = 0; i < kConstructCount; ++i)
            for (std::size_t j = i + 1; j < kConstructCount; ++j) {
                const auto& cell = s.ev.discriminant.cells[i][j];
                if (!cell.r) continue;
                ++cells;
                inside += std::abs(*cell.r) <= 0.2;
                lo = std::min(lo, *cell.r);
                hi = std::max(hi, *cell.r);
            }
        const double frac = cells ? double(inside) / cells : 0.0;
        pass = pass && cells == 171 && frac >= 0.95;
        detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(s.seed) + " " +
                  std::to_string(inside) + "/" + std::to_string(cells);
    }
    detail += " cells within +-0.2; r range [" + fmt(lo) + ", " + fmt(hi) + "]";
    return {pass, detail};
}

Outcome smape_bounds() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1e3, 1e3);
    std::uniform_int_distribution<int> kind(0, 3);
    double lo = 1e9, hi = -1e9, classic_hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double p = U(rng), a = U(rng);
        switch (kind(rng)) {
            case 1: p = 0.0; break;
            case 2: a = 0.0; break;
            case 3: p = -a; break;
            default: break;
        }
        double s = eval::smape(std::vector<double>{p}, std::vector<double>{a});
        lo = std::min(lo, s);
        hi = std::max(hi, s);
        const double d = std::abs(p) + std::abs(a);
        classic_hi = std::max(classic_hi, d > 0 ? 100.0 * std::abs(p - a) / d : 0.0);
    }
    // A small constant baseline against a mostly-zero count target.
    std::vector<double> actual(100, 0.0), base(100, 1.6);
    actual[0] = 40.0;
    actual[1] = 30.0;
    actual[2] = 2.0;
    const double tobacco_like = eval::smape(base, actual);
    const bool pass = lo >= 0.0 && hi <= 200.0 && classic_hi <= 100.0 + 1e-9 && tobacco_like >= 195.6 && tobacco_like <= 200.0;
    return {pass, "10000 pairs in [" + fmt(lo, 2) + ", " + fmt(hi, 2) + "]; count-target baseline reaches " +
                      fmt(tobacco_like, 2) + " >= 195.6, above the 100-bounded variant's max " + fmt(classic_hi, 2)};
}

Outcome determinism(fs::path& models_dir, fs::path& data_dir) {
    auto root = testing::scratch("acceptance_det");
    data_dir = root / "data";
    auto spec = testing::small_spec(808, 160);
    spec.days = 7;
    spec.social_columns = 120;
    testing::spit(root / "spec.json", synth::spec_to_json(spec).dump());
    if (testing::run_cli("synth --spec " + (root / "spec.json").string() + " --out " + data_dir.string(), root / "synth.log"))
        return {false, "synth failed: " + testing::slurp(root / "synth.log")};
    for (const char* out : {"a", "b"})
        if (testing::run_cli("run --data " + data_dir.string() + " --out " + (root / out).string() + " --seed 9",
                             root / (std::string(out) + ".log")))
            return {false, std::string("run failed: ") + testing::slurp(root / (std::string(out) + ".log"))};
    models_dir = root / "a" / "models";
    std::size_t files = 0;
    std::vector<std::string> differing;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root / "a");
        ++files;
        if (!fs::exists(root / "b" / rel) || testing::slurp(e.path()) != testing::slurp(root / "b" / rel))
            differing.push_back(rel.string());
    }
    std::size_t files_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "b")) files_b += e.is_regular_file();
    std::string detail = std::to_string(files) + " files compared, " + std::to_string(differing.size()) + " differ";
    if (!differing.empty()) detail += " (" + differing.front() + ")";
    return {files > 0 && files == files_b && differing.empty(), detail};
}

Outcome solver_oracles() {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> N;
    Block x;
    for (int j = 0; j < 6; ++j) x.columns.push_back("x" + std::to_string(j));
    x.values.resize(200, 6);
    std::vector<double> y;
    for (Eigen::Index i = 0; i < 200; ++i) {
        double v = 1.0;
        for (Eigen::Index j = 0; j < 6; ++j) {
            x.values(i, j) = N(rng) * double(j + 1);
            v += (j % 2 ? 0.7 : -1.2) * x.values(i, j);
        }
        y.push_back(v + N(rng));
    }
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    auto ols = models::fit({models::Family::Ols, {}}, x, y, 0);
    Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), 200);
    auto ne = oracle::normal_equations(x.values, yv);
    double ols_err = rel(ols.intercept, ne[0]);
    for (Eigen::Index j = 0; j < 6; ++j) ols_err = std::max(ols_err, rel(ols.coef[j], ne[j + 1]));

    auto ridge = models::fit({models::Family::Ridge, {{"lambda", 0.0}}}, x, y, 0);
    double ridge_err = rel(ridge.intercept, ols.intercept);
    for (Eigen::Index j = 0; j < 6; ++j) ridge_err = std::max(ridge_err, rel(ridge.coef[j], ols.coef[j]));

    auto cart = models::fit({models::Family::Cart, {{"min_leaf", 5}}}, x, y, 3);
    auto forest = models::fit(
        {models::Family::RandomForest, {{"min_leaf", 5}, {"trees", 1}, {"bootstrap", 0}, {"max_features", 6}}}, x, y, 3);
    const bool trees_equal = models::predict(cart, x) == models::predict(forest, x);

    std::vector<FeatureMatrix> blocks;
    for (auto [m, p] : {std::pair{ModalityKind::Wearable, 5}, std::pair{ModalityKind::PhoneAgent, 4},
                        std::pair{ModalityKind::Beacon, 3}}) {
        std::vector<std::string> pids, cols;
        for (int i = 0; i < 150; ++i) pids.push_back("p" + std::to_string(i));
        for (int j = 0; j < p; ++j) cols.push_back(std::string(modality_name(m)) + std::to_string(j));
        FeatureMatrix fm(m, pids, cols);
        std::uniform_real_distribution<double> U;
        for (std::size_t i = 0; i < 150; ++i) {
            const bool absent = U(rng) < 0.2;
            for (std::size_t j = 0; j < cols.size(); ++j)
                if (!absent && U(rng) > 0.1) fm.set(i, j, N(rng) * 3.0 + double(j));
        }
        blocks.push_back(std::move(fm));
    }
    impute::ImputationOptions opt;
    opt.clusters = 1;
    auto a = impute::apply_imputation(impute::fit_imputation(blocks, opt), blocks);
    opt.modality_strategy = ImputeStrategy::Mean;
    auto b = impute::apply_imputation(impute::fit_imputation(blocks, opt), blocks);
    double imp_err = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) imp_err = std::max(imp_err, (a[k].values - b[k].values).cwiseAbs().maxCoeff());

    const bool pass = ols_err <= 1e-8 && ridge_err <= 1e-8 && trees_equal && imp_err <= 1e-12;
    return {pass, "OLS vs normal equations " + std::to_string(ols_err) + ", ridge(0) vs OLS " + std::to_string(ridge_err) +
                      ", single-tree forest " + (trees_equal ? "identical to" : "differs from") +
                      " CART, k=1 cluster vs mean " + std::to_string(imp_err)};
}

Outcome range_compliance(const std::vector<SeedRun>& runs, const fs::path& models_dir, const fs::path& data_dir) {
    std::size_t emitted = 0, bad = 0;
    for (const auto& s : runs) {
        emitted += s.emitted;
        bad += s.out_of_range;
    }
    std::string extra;
    if (!models_dir.empty()) {
        // Replay the saved models on a cohort with wild sensor values.
        auto root = testing::scratch("acceptance_range");
        auto spec = testing::small_spec(909, 40);
        spec.days = 7;
        spec.social_columns = 120;
        spec.outlier_rate = 0.3;
        spec.hon_strength = 6.0;
        auto g = synth::generate(spec);
        for (auto& [pid, sigs] : g.raw.wearable->by_participant)
            for (auto& [name, ts] : sigs) {
                std::vector<Point> pts = ts.points();
                for (auto& p : pts) p.value *= 25.0;
                ts = TimeSeries::from_points(pid, name, pts);
            }
        ingest::write_cohort(g.raw, (root / "data").string());
        fs::remove(root / "data" / "ground_truth.csv");
        if (testing::run_cli("predict --models " + models_dir.string() + " --data " + (root / "data").string() +
                                 " --out " + (root / "out").string(),
                             root / "predict.log") == 0) {
            auto t = csv::read_file((root / "out" / "predictions.csv").string());
            auto cfg = validate_config({});
            for (std::size_t c = 1; c < t.header.size(); ++c) {
                auto rg = cfg->construct_ranges.at(construct_from_name(t.header[c]));
                for (const auto& row : t.rows) {
                    ++emitted;
                    double v = std::stod(row[c]);
                    if (!(v >= rg.lo && v <= rg.hi)) ++bad;
                }
            }
            extra = " (including predict on an out-of-distribution cohort)";
        } else {
            ++bad;
            extra = " (predict failed: " + testing::slurp(root / "predict.log") + ")";
        }
        (void)data_dir;
    }
    return {emitted > 0 && bad == 0,
            std::to_string(emitted - bad) + "/" + std::to_string(emitted) + " emitted predictions in range" + extra};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    int n_seeds = 20;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        } else if (a == "--seeds" && i + 1 < argc) {
            n_seeds = std::stoi(argv[++i]);
        }
    }
    auto wanted = [&](int c) { return only.empty() || only.count(c); };
    diag::set_warning_sink([](const std::string&) {});

    std::map<int, Outcome> results;
    auto record = [&](int c, const char* title, Outcome o) {
        std::cout << "criterion " << c << " [" << title << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
                  << std::endl;
        results[c] = std::move(o);
    };
    auto guarded = [&](int c, const char* title, auto fn) {
        if (!wanted(c)) return;
        try {
            record(c, title, fn());
        } catch (const std::exception& e) {
            record(c, title, {false, std::string("exception: ") + e.what()});
        }
    };

    guarded(1, "HON oracle", hon_oracle);
    guarded(2, "Kendall tau-b", kendall_oracle);
    guarded(3, "leakage", leakage_suite);

    std::vector<SeedRun> pattern;
    if (wanted(4) || wanted(5) || wanted(10)) {
        for (int s = 0; s < n_seeds; ++s) {
            pattern.push_back(pattern_run(1000 + static_cast<std::uint64_t>(s), synth::LatentLayout::Default));
            std::cerr << "seed " << 1000 + s << " done in " << fmt(pattern.back().seconds, 1) << " s" << std::endl;
        }
    }
    guarded(4, "baseline dominance", [&] { return baseline_dominance(pattern); });
    guarded(5, "incremental validity", [&] { return incremental_validity(pattern); });
    guarded(6, "discriminant validity", [&] {
        std::vector<SeedRun> indep;
        for (std::uint64_t s : {2000, 2001, 2002}) indep.push_back(pattern_run(s, synth::LatentLayout::Independent));
        for (const auto& r : indep) pattern.push_back(r);
        return discriminant_validity(indep);
    });
    guarded(7, "SMAPE definition", smape_bounds);
    fs::path models_dir, data_dir;
    guarded(8, "determinism", [&] { return determinism(models_dir, data_dir); });
    guarded(9, "solver oracles", solver_oracles);
    guarded(10, "range compliance", [&] { return range_compliance(pattern, models_dir, data_dir); });

    int failed = 0;
    for (const auto& [c, o] : results) failed += !o.pass;
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
