// sefdm - command line front end
//
//   sefdm sweep    --n 8 --alpha 0.85,0.9 --snr-db 0:14:2 --detector sd,iterative --out ber.csv
//   sefdm matrices --n 8 --alpha 0.85
//   sefdm ops      --method iterative --n 8 --alpha 0.5 --l 4
//   sefdm figure 5 --out fig5.csv

#include "sefdm/sefdm.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

namespace {

using namespace sefdm;

constexpr int kUsageError = 2;

struct SweepFlags {
    std::map<std::string, std::string> values;  // flag name -> raw text
    std::string config;
    std::string out;
    bool timing = false;
};

void add_sweep_flags(CLI::App& cmd, SweepFlags& f, bool full) {
    static const std::vector<std::pair<std::string, std::string>> flags = {
        {"n", "carrier counts, e.g. 8 or 4,8,16"},
        {"alpha", "compression factors, list or start:stop:step"},
        {"snr-db", "Es/N0 points in dB, list or start:stop:step"},
        {"detector", "iterative, ml, sd, zf (comma list)"},
        {"iterations", "iteration counts for the iterative detector"},
        {"lambda", "relaxation parameter"},
        {"d-start", "soft-mapping parameter at the first iteration"},
        {"d-end", "soft-mapping parameter at the last iteration"},
        {"mapping", "soft, hard or none"},
        {"start", "iterative starting point: zf or matched"},
        {"sd-epsilon", "sphere decoder regularization (default: noise variance)"},
        {"constellation", "qam4 or bpsk"},
        {"min-bits", "bits per cell before stopping"},
        {"min-errors", "bit errors per cell before stopping"},
        {"seed", "base seed"},
        {"threads", "worker threads (default SEFDM_THREADS or all cores)"},
    };
    for (const auto& [name, help] : flags) {
        if (!full && (name == "alpha" || name == "snr-db" || name == "detector")) continue;
        cmd.add_option("--" + name, f.values[name], help);
    }
    cmd.add_option("--out", f.out, "output CSV path");
    cmd.add_flag("--timing", f.timing, "record wall-clock seconds per cell (output no longer reproducible)");
    if (full) cmd.add_option("--config", f.config, "key = value file; command line flags take precedence")->check(CLI::ExistingFile);
}

void apply_flags(const CLI::App& cmd, const SweepFlags& f, SweepSpec& spec) {
    for (const auto& [name, value] : f.values) {
        if (cmd.count("--" + name) == 0) continue;
        if (!apply_setting(spec, name, value)) throw InvalidConfig("unhandled flag --" + name);
    }
    spec.timing = f.timing;
}

void print_summary(const std::vector<BerRecord>& records, const std::string& out) {
    for (const auto& r : records) {
        std::printf("N=%d alpha=%s snr=%s %s it=%d bits=%llu errors=%llu ber=%.3e %s\n", r.n,
                    format_number(r.alpha).c_str(), format_number(r.snr_db).c_str(), r.detector.c_str(),
                    r.iterations, static_cast<unsigned long long>(r.bits_sent),
                    static_cast<unsigned long long>(r.bit_errors), r.ber, r.status.c_str());
    }
    std::printf("wrote %zu rows to %s\n", records.size(), out.c_str());
}

void print_matrix(const char* name, const CMatrix& m) {
    std::printf("%s (%ldx%ld)\n", name, static_cast<long>(m.rows()), static_cast<long>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            std::printf(" %+.6f%+.6fj", m(i, j).real(), m(i, j).imag());
        std::printf("\n");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEFDM transmission and detection simulator"};
    app.require_subcommand(1);

    // sweep
    SweepFlags sweep_flags;
    auto* sweep = app.add_subcommand("sweep", "Monte Carlo BER sweep to CSV");
    add_sweep_flags(*sweep, sweep_flags, true);

    // matrices
    int mat_n = 8;
    double mat_alpha = 1.0;
    auto* matrices = app.add_subcommand("matrices", "print F, M = F^H F and the condition number of M");
    matrices->add_option("--n", mat_n, "carrier count")->required();
    matrices->add_option("--alpha", mat_alpha, "compression factor")->required();

    // ops
    std::string ops_method = "iterative";
    int ops_n = 8;
    double ops_alpha = 1.0;
    int ops_l = 4;
    double ops_gamma = 0.0;
    bool ops_measure = false;
    double ops_snr = 10.0;
    int ops_trials = 200;
    std::uint64_t ops_seed = 1;
    auto* ops_cmd = app.add_subcommand("ops", "predicted (and optionally measured) operation counts");
    ops_cmd->add_option("--method", ops_method, "iterative, ml or sd")->check(CLI::IsMember({"iterative", "ml", "sd"}));
    ops_cmd->add_option("--n", ops_n, "carrier count");
    ops_cmd->add_option("--alpha", ops_alpha, "compression factor");
    ops_cmd->add_option("--l", ops_l, "constellation size");
    ops_cmd->add_option("--gamma", ops_gamma, "SD exponent for the L^(gamma N) prediction");
    ops_cmd->add_flag("--measure", ops_measure, "run the sphere decoder and report the measured median (QAM4)");
    ops_cmd->add_option("--snr-db", ops_snr, "SNR for --measure");
    ops_cmd->add_option("--trials", ops_trials, "trials for --measure");
    ops_cmd->add_option("--seed", ops_seed, "seed for --measure");

    // figure
    int figure_no = 3;
    SweepFlags fig_flags;
    auto* figure = app.add_subcommand("figure", "canned BER grids (3: BER vs alpha, 4/5: BER vs SNR)");
    figure->add_option("number", figure_no, "3, 4 or 5")->required()->check(CLI::IsMember({3, 4, 5}));
    add_sweep_flags(*figure, fig_flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kUsageError;
    }

    try {
        if (*sweep) {
            SweepSpec spec;
            std::string out = "sefdm_sweep.csv";
            if (!sweep_flags.config.empty()) load_config_file(sweep_flags.config, spec, &out);
            apply_flags(*sweep, sweep_flags, spec);
            if (!sweep_flags.out.empty()) out = sweep_flags.out;
            print_summary(run_sweep(spec, out), out);
        } else if (*matrices) {
            const SefdmConfig cfg(mat_n, mat_alpha);
            const auto m = carrier_matrix(cfg);
            std::printf("N=%d alpha=%s\n", mat_n, format_number(mat_alpha).c_str());
            print_matrix("F", m.f_matrix);
            print_matrix("M", m.gram);
            std::printf("condition(M)=%.6g\n", m.condition_estimate);
        } else if (*ops_cmd) {
            const Method method = parse_method(ops_method);
            std::optional<double> gamma;
            if (ops_cmd->count("--gamma")) gamma = ops_gamma;
            if (ops_measure) {
                if (method != Method::SD) throw InvalidConfig("--measure applies to --method sd");
                const SefdmSystem sys(SefdmConfig(ops_n, ops_alpha));
                const double eps = NoiseModel::from_snr_db(ops_snr).sigma2;
                const auto rep = sd_complexity_report(sys, ops_snr, ops_trials, ops_seed, eps);
                std::printf("method=sd N=%d alpha=%s L=%zu snr_db=%s trials=%d\n", ops_n,
                            format_number(ops_alpha).c_str(), sys.constellation().size(),
                            format_number(ops_snr).c_str(), ops_trials);
                std::printf("median RA=%.6g RM=%.6g visited_nodes=%.6g\n", rep.measured->real_additions,
                            rep.measured->real_multiplications, rep.median_visited_nodes);
                std::printf("ratio_vs_iteration=%.6g gamma=%.4f\n", *rep.ratio_vs_iteration, *rep.sd_gamma_estimate);
                if (const auto pub = published_time_ratio(ops_n, ops_alpha))
                    std::printf("published_time_ratio=%g (wall clock, context only)\n", *pub);
            } else {
                if (method == Method::SD && !gamma) throw InvalidConfig("--method sd needs --gamma or --measure");
                const auto p = predicted_ops(method, ops_n, ops_alpha, ops_l, gamma);
                std::printf("method=%s N=%d alpha=%s L=%d RA=%s RM=%s\n", ops_method.c_str(), ops_n,
                            format_number(ops_alpha).c_str(), ops_l, format_number(p.real_additions).c_str(),
                            format_number(p.real_multiplications).c_str());
            }
        } else if (*figure) {
            SweepSpec spec = figure_spec(figure_no);
            apply_flags(*figure, fig_flags, spec);
            const std::string out = fig_flags.out.empty() ? "figure" + std::to_string(figure_no) + ".csv" : fig_flags.out;
            print_summary(run_sweep(spec, out), out);
        }
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
