// harness.hpp - Monte Carlo BER driver
//
// A sweep is the Cartesian product n x alpha x snr x detector x iterations.
// Every cell owns a seed derived from the base seed and its coordinates, and
// every trial inside a cell reseeds from (cell seed ^ trial index), so a
// cell's result does not depend on which worker runs it or in what order.

#pragma once

#include "sefdm/complexity.hpp"
#include "sefdm/core.hpp"
#include "sefdm/detectors.hpp"
#include "sefdm/txrx.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace sefdm {

enum class DetectorKind { Iterative, Ml, Sd, Zf };

inline std::string_view to_string(DetectorKind d) {
    switch (d) {
        case DetectorKind::Iterative: return "iterative";
        case DetectorKind::Ml: return "ml";
        case DetectorKind::Sd: return "sd";
        case DetectorKind::Zf: return "zf";
    }
    return "?";
}

inline DetectorKind parse_detector(std::string_view s) {
    if (s == "iterative") return DetectorKind::Iterative;
    if (s == "ml") return DetectorKind::Ml;
    if (s == "sd") return DetectorKind::Sd;
    if (s == "zf") return DetectorKind::Zf;
    throw InvalidConfig("unknown detector '" + std::string(s) + "'");
}

/// How the iterative detector maps between iterations.
enum class MappingMode { Soft, Hard, None };

inline MappingMode parse_mapping(std::string_view s) {
    if (s == "soft") return MappingMode::Soft;
    if (s == "hard") return MappingMode::Hard;
    if (s == "none") return MappingMode::None;
    throw InvalidConfig("unknown mapping '" + std::string(s) + "'");
}

/// Detector settings shared by all cells of a sweep.
struct DetectorOptions {
    double lambda = 1.0;
    double d_start = 1.0;
    double d_end = 0.0;
    MappingMode mapping = MappingMode::Soft;
    IterationStart start = IterationStart::ZeroForcing;
    std::optional<double> sd_epsilon;  ///< defaults to the cell's noise variance
    std::uint64_t ml_cap = std::uint64_t{1} << 24;
};

struct CellSpec {
    int n = 8;
    double alpha = 1.0;
    double snr_db = 10.0;
    DetectorKind detector = DetectorKind::Iterative;
    int iterations = 10;
    Scheme scheme = Scheme::QAM4;
    DetectorOptions options;
    std::uint64_t min_bits = 100000;
    std::uint64_t min_bit_errors = 100;
    std::uint64_t seed = 1;
    bool timing = false;
};

struct BerRecord {
    int n = 0;
    double alpha = 0.0;
    double snr_db = 0.0;
    std::string detector;
    int iterations = 0;
    std::uint64_t bits_sent = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    std::uint64_t seed = 0;
    double ra_measured = 0.0;  ///< mean per detected block
    double rm_measured = 0.0;
    double wall_seconds = 0.0;
    double ebn0_db = 0.0;
    std::optional<OpCount> predicted;  ///< per block
    std::string status = "ok";
};

// ============================================================================
// Seeding
// ============================================================================

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Shortest round-trip decimal form, independent of locale.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string detector_label(DetectorKind d, const DetectorOptions& o) {
    std::string label(to_string(d));
    if (d == DetectorKind::Iterative) {
        if (o.mapping == MappingMode::Hard) label += "-hard";
        if (o.mapping == MappingMode::None) label += "-nomap";
    }
    return label;
}

inline std::uint64_t cell_seed(std::uint64_t base_seed, int n, double alpha, double snr_db,
                               std::string_view detector, int iterations) {
    const std::string key = std::to_string(n) + "|" + format_number(alpha) + "|" + format_number(snr_db) +
                            "|" + std::string(detector) + "|" + std::to_string(iterations);
    return base_seed ^ fnv1a(key);
}

// ============================================================================
// run_cell
// ============================================================================

inline IterativeConfig iterative_config(const DetectorOptions& o, int iterations) {
    IterativeConfig c;
    switch (o.mapping) {
        case MappingMode::Soft: break;
        case MappingMode::Hard: c = IterativeConfig::hard(iterations); break;
        case MappingMode::None: c = IterativeConfig::unmapped(iterations); break;
    }
    c.max_iterations = iterations;
    c.lambda = o.lambda;
    if (o.mapping == MappingMode::Soft) {
        c.d_start = o.d_start;
        c.d_end = o.d_end;
    }
    c.start = o.start;
    return c;
}

/**
 * Monte Carlo loop for one (N, alpha, SNR, detector, iterations) point.
 * Stops once min_bits are sent and either min_bit_errors errors were seen
 * or 100 * min_bits bits were sent.
 */
inline BerRecord run_cell(const CellSpec& cell) {
    const auto t0 = std::chrono::steady_clock::now();
    const SefdmSystem sys(SefdmConfig(cell.n, cell.alpha, cell.scheme));
    const auto& cons = sys.constellation();
    const auto noise = NoiseModel::from_snr_db(cell.snr_db);
    const int bps = cons.bits_per_symbol();

    BerRecord rec;
    rec.n = cell.n;
    rec.alpha = cell.alpha;
    rec.snr_db = cell.snr_db;
    rec.detector = detector_label(cell.detector, cell.options);
    rec.iterations = cell.detector == DetectorKind::Iterative ? cell.iterations : 0;
    rec.seed = cell.seed;
    rec.ebn0_db = ebn0_db(cell.snr_db, bps);

    std::optional<SphereDecoder> sd;
    if (cell.detector == DetectorKind::Sd)
        sd.emplace(sys, SphereConfig{cell.options.sd_epsilon.value_or(noise.sigma2)});
    const IterativeConfig icfg = iterative_config(cell.options, std::max(cell.iterations, 1));
    const MlConfig mlcfg{cell.options.ml_cap};

    const int l = static_cast<int>(cons.size());
    if (cell.detector == DetectorKind::Iterative)
        rec.predicted = static_cast<double>(icfg.max_iterations) *
                        predicted_ops(Method::IterativePerIteration, cell.n, cell.alpha, l);
    if (cell.detector == DetectorKind::Ml) rec.predicted = predicted_ops(Method::ML, cell.n, cell.alpha, l);

    const std::uint64_t hard_cap = 100 * cell.min_bits;
    std::vector<int> sent(static_cast<std::size_t>(cell.n));
    CVector s(cell.n);
    OpCount ops_total;
    std::uint64_t trials = 0;
    while (!(rec.bits_sent >= cell.min_bits &&
             (rec.bit_errors >= cell.min_bit_errors || rec.bits_sent >= hard_cap))) {
        std::mt19937_64 rng(splitmix64(cell.seed ^ trials));
        for (int i = 0; i < cell.n; ++i) {
            const auto idx = static_cast<int>(rng() >> (64 - bps));
            sent[static_cast<std::size_t>(i)] = idx;
            s(i) = cons.point(static_cast<std::size_t>(idx));
        }
        const auto r = correlate(add_awgn(modulate(s, sys), noise, rng), sys);

        DetectorResult res;
        switch (cell.detector) {
            case DetectorKind::Iterative: res = iterate_detect(r, sys, icfg); break;
            case DetectorKind::Ml: res = ml_detect(r, sys, mlcfg); break;
            case DetectorKind::Sd: res = sd->search(r); break;
            case DetectorKind::Zf: res = zf_detect(r, sys); break;
        }
        for (int i = 0; i < cell.n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            rec.bit_errors += static_cast<std::uint64_t>(
                std::popcount(static_cast<unsigned>(sent[k] ^ res.indices[k])));
        }
        rec.bits_sent += static_cast<std::uint64_t>(cell.n * bps);
        if (res.op_counts) ops_total += *res.op_counts;
        ++trials;
    }
    rec.ber = static_cast<double>(rec.bit_errors) / static_cast<double>(rec.bits_sent);
    rec.ra_measured = ops_total.real_additions / static_cast<double>(trials);
    rec.rm_measured = ops_total.real_multiplications / static_cast<double>(trials);
    if (cell.timing)
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

// ============================================================================
// Sweeps
// ============================================================================

struct SweepSpec {
    std::vector<int> n_list{8};
    std::vector<double> alpha_list{1.0};
    std::vector<double> snr_db_list{10.0};
    std::vector<DetectorKind> detectors{DetectorKind::Iterative};
    std::vector<int> iterations_list{10};
    Scheme scheme = Scheme::QAM4;
    DetectorOptions options;
    std::uint64_t min_bits = 100000;
    std::uint64_t min_bit_errors = 100;
    std::uint64_t base_seed = 1;
    unsigned threads = 0;  ///< 0: SEFDM_THREADS or hardware concurrency
    bool timing = false;

    void validate() const {
        if (n_list.empty()) throw InvalidConfig("empty n list");
        if (alpha_list.empty()) throw InvalidConfig("empty alpha list");
        if (snr_db_list.empty()) throw InvalidConfig("empty snr list");
        if (detectors.empty()) throw InvalidConfig("empty detector list");
        if (iterations_list.empty()) throw InvalidConfig("empty iterations list");
        if (min_bits == 0) throw InvalidConfig("min_bits must be positive");
        for (int n : n_list) (void)SefdmConfig(n, 1.0);
        for (double a : alpha_list) (void)SefdmConfig(2, a);
        for (int it : iterations_list)
            if (it < 1) throw InvalidConfig("iterations must be >= 1");
        if (!(options.lambda > 0.0)) throw InvalidConfig("lambda must be > 0");
        if (!(options.d_end >= 0.0 && options.d_end <= options.d_start))
            throw InvalidConfig("need 0 <= d_end <= d_start");
    }

    std::vector<CellSpec> cells() const {
        std::vector<CellSpec> out;
        for (int n : n_list)
            for (double a : alpha_list)
                for (double snr : snr_db_list)
                    for (auto det : detectors) {
                        const bool iterative = det == DetectorKind::Iterative;
                        const std::vector<int> its = iterative ? iterations_list : std::vector<int>{0};
                        for (int it : its) {
                            CellSpec c;
                            c.n = n;
                            c.alpha = a;
                            c.snr_db = snr;
                            c.detector = det;
                            c.iterations = it;
                            c.scheme = scheme;
                            c.options = options;
                            c.min_bits = min_bits;
                            c.min_bit_errors = min_bit_errors;
                            c.timing = timing;
                            c.seed = cell_seed(base_seed, n, a, snr, detector_label(det, options), it);
                            out.push_back(c);
                        }
                    }
        return out;
    }
};

inline unsigned worker_count(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SEFDM_THREADS")) {
        unsigned v = 0;
        const std::string_view sv(env);
        const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
        if (res.ec == std::errc() && v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ============================================================================
// CSV
// ============================================================================

inline constexpr std::string_view kCsvHeader =
    "n,alpha,snr_db,detector,iterations,bits_sent,bit_errors,ber,seed,ra_measured,rm_measured,"
    "wall_seconds,ebn0_db,ra_predicted,rm_predicted,status";

inline std::string csv_metadata(const SweepSpec& spec) {
    std::string m = "# sefdm-ber v1 constellation=" + std::string(to_string(spec.scheme)) +
                    " bit_labels=gray snr=EsN0_per_sample lambda=" + format_number(spec.options.lambda) +
                    " d_start=" + format_number(spec.options.d_start) +
                    " d_end=" + format_number(spec.options.d_end) +
                    " start=" + (spec.options.start == IterationStart::ZeroForcing ? "zf" : "matched") +
                    " min_bits=" + std::to_string(spec.min_bits) +
                    " min_errors=" + std::to_string(spec.min_bit_errors) +
                    " base_seed=" + std::to_string(spec.base_seed);
    return m;
}

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

inline std::string csv_row(const BerRecord& r) {
    std::string row;
    row += std::to_string(r.n) + ',' + format_number(r.alpha) + ',' + format_number(r.snr_db) + ',';
    row += r.detector + ',' + std::to_string(r.iterations) + ',';
    row += std::to_string(r.bits_sent) + ',' + std::to_string(r.bit_errors) + ',' + format_number(r.ber) + ',';
    row += std::to_string(r.seed) + ',' + format_number(r.ra_measured) + ',' + format_number(r.rm_measured) + ',';
    row += format_number(r.wall_seconds) + ',' + format_number(r.ebn0_db) + ',';
    if (r.predicted) {
        row += format_number(r.predicted->real_additions) + ',' + format_number(r.predicted->real_multiplications);
    } else {
        row += ',';
    }
    row += ',' + csv_escape(r.status);
    return row;
}

/**
 * Runs every cell and writes the CSV. Rows are streamed in cell order as
 * soon as all earlier cells are done, into `<out>.partial`, which is renamed
 * to `out` only after the last row is flushed. A cell that throws becomes a
 * row with status "error: ..." instead of aborting the sweep.
 */
inline std::vector<BerRecord> run_sweep(const SweepSpec& spec, const std::filesystem::path& out_path) {
    spec.validate();
    const auto cells = spec.cells();
    const std::size_t count = cells.size();

    const auto partial = std::filesystem::path(out_path.string() + ".partial");
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + partial.string() + " for writing");
    out << csv_metadata(spec) << '\n' << kCsvHeader << '\n';

    std::vector<std::optional<BerRecord>> results(count);
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            BerRecord rec;
            try {
                rec = run_cell(cells[i]);
            } catch (const std::exception& e) {
                const auto& c = cells[i];
                rec.n = c.n;
                rec.alpha = c.alpha;
                rec.snr_db = c.snr_db;
                rec.detector = detector_label(c.detector, c.options);
                rec.iterations = c.detector == DetectorKind::Iterative ? c.iterations : 0;
                rec.seed = c.seed;
                rec.ebn0_db = ebn0_db(c.snr_db, SefdmConfig(2, 1.0, c.scheme).constellation().bits_per_symbol());
                rec.status = std::string("error: ") + e.what();
            }
            {
                std::lock_guard lock(mu);
                results[i] = std::move(rec);
            }
            cv.notify_all();
        }
    };

    const unsigned workers = std::min<std::size_t>(worker_count(spec.threads), std::max<std::size_t>(count, 1));
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);

    bool io_failed = false;
    for (std::size_t i = 0; i < count; ++i) {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return results[i].has_value(); });
        const std::string row = csv_row(*results[i]);
        lock.unlock();
        if (!io_failed) {
            out << row << '\n';
            out.flush();
            io_failed = !out;
        }
    }
    pool.clear();
    out.close();
    if (io_failed || !out) throw Error("write to " + partial.string() + " failed; partial results kept there");
    std::filesystem::rename(partial, out_path);

    std::vector<BerRecord> records;
    records.reserve(count);
    for (auto& r : results) records.push_back(std::move(*r));
    return records;
}

// ============================================================================
// Configuration text
// ============================================================================

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_scalar(std::string_view s) {
    const std::string t = trim(s);
    T v{};
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw InvalidConfig("invalid number '" + t + "'");
    return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    for (;;) {
        const auto next = s.find(sep, pos);
        parts.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return parts;
}

}  // namespace detail

/// "a,b,c" or "start:stop:step" (inclusive).
inline std::vector<double> parse_real_list(std::string_view text) {
    std::vector<double> out;
    for (const auto& item : detail::split(text, ',')) {
        if (item.empty()) throw InvalidConfig("empty list entry in '" + std::string(text) + "'");
        if (item.find(':') != std::string::npos) {
            const auto p = detail::split(item, ':');
            if (p.size() != 3) throw InvalidConfig("range must be start:stop:step, got '" + item + "'");
            const double a = detail::parse_scalar<double>(p[0]);
            const double b = detail::parse_scalar<double>(p[1]);
            const double step = detail::parse_scalar<double>(p[2]);
            if (!(step > 0.0) || b < a) throw InvalidConfig("bad range '" + item + "'");
            for (int i = 0;; ++i) {
                const double v = std::round((a + i * step) * 1e9) / 1e9;
                if (v > b + 1e-9) break;
                out.push_back(v);
            }
        } else {
            out.push_back(detail::parse_scalar<double>(item));
        }
    }
    return out;
}

inline std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    for (const auto& item : detail::split(text, ',')) out.push_back(detail::parse_scalar<int>(item));
    return out;
}

inline std::vector<DetectorKind> parse_detector_list(std::string_view text) {
    std::vector<DetectorKind> out;
    for (const auto& item : detail::split(text, ',')) out.push_back(parse_detector(item));
    return out;
}

/// Applies one `key = value` setting. Returns false for keys it does not know.
inline bool apply_setting(SweepSpec& spec, std::string_view key, std::string_view value) {
    const std::string k = detail::trim(key);
    const std::string v = detail::trim(value);
    if (k == "n" || k == "n_carriers") spec.n_list = parse_int_list(v);
    else if (k == "alpha") spec.alpha_list = parse_real_list(v);
    else if (k == "snr_db" || k == "snr-db") spec.snr_db_list = parse_real_list(v);
    else if (k == "detector" || k == "detectors") spec.detectors = parse_detector_list(v);
    else if (k == "iterations") spec.iterations_list = parse_int_list(v);
    else if (k == "constellation") spec.scheme = parse_scheme(v);
    else if (k == "lambda") spec.options.lambda = detail::parse_scalar<double>(v);
    else if (k == "d_start" || k == "d-start") spec.options.d_start = detail::parse_scalar<double>(v);
    else if (k == "d_end" || k == "d-end") spec.options.d_end = detail::parse_scalar<double>(v);
    else if (k == "mapping") spec.options.mapping = parse_mapping(v);
    else if (k == "start") {
        if (v == "zf") spec.options.start = IterationStart::ZeroForcing;
        else if (v == "matched") spec.options.start = IterationStart::Matched;
        else throw InvalidConfig("unknown start '" + v + "'");
    }
    else if (k == "sd_epsilon" || k == "sd-epsilon") spec.options.sd_epsilon = detail::parse_scalar<double>(v);
    else if (k == "min_bits" || k == "min-bits") spec.min_bits = detail::parse_scalar<std::uint64_t>(v);
    else if (k == "min_errors" || k == "min-errors") spec.min_bit_errors = detail::parse_scalar<std::uint64_t>(v);
    else if (k == "seed") spec.base_seed = detail::parse_scalar<std::uint64_t>(v);
    else if (k == "threads") spec.threads = detail::parse_scalar<unsigned>(v);
    else return false;
    return true;
}

/**
 * Reads `key = value` lines ('#' starts a comment). Keys mirror the CLI flags
 * with '_' or '-'; lists are comma separated or start:stop:step ranges.
 * An `out` key is returned through `out_path` when given.
 */
inline void load_config_text(std::string_view text, SweepSpec& spec, std::string* out_path = nullptr) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key == "out") {
            if (out_path) *out_path = value;
            continue;
        }
        if (!apply_setting(spec, key, value))
            throw InvalidConfig("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
}

inline void load_config_file(const std::filesystem::path& path, SweepSpec& spec, std::string* out_path = nullptr) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    load_config_text(buf.str(), spec, out_path);
}

// ============================================================================
// Canned figure grids
// ============================================================================

inline const std::vector<double>& figure_alpha_grid() {
    static const std::vector<double> grid{0.75, 0.8, 0.85, 0.9, 0.95, 1.0};
    return grid;
}

/**
 * 3: BER vs alpha at 10 dB, SD and the iterative detector after 1, 2, 5, 10 iterations (N=4 by default)
 * 4: BER vs SNR, N=8, alpha in {0.8, 0.85, 0.9, 1.0}, iterative after 10 iterations
 * 5: BER vs SNR, N=8, alpha=0.85, SD and iterative
 */
inline SweepSpec figure_spec(int figure) {
    SweepSpec s;
    s.min_bits = 20000;
    switch (figure) {
        case 3:
            s.n_list = {4};
            s.alpha_list = figure_alpha_grid();
            s.snr_db_list = {10.0};
            s.detectors = {DetectorKind::Sd, DetectorKind::Iterative};
            s.iterations_list = {1, 2, 5, 10};
            break;
        case 4:
            s.n_list = {8};
            s.alpha_list = {0.8, 0.85, 0.9, 1.0};
            s.snr_db_list = parse_real_list("0:14:1");
            s.detectors = {DetectorKind::Iterative};
            s.iterations_list = {10};
            break;
        case 5:
            s.n_list = {8};
            s.alpha_list = {0.85};
            s.snr_db_list = parse_real_list("0:14:2");
            s.detectors = {DetectorKind::Sd, DetectorKind::Iterative};
            s.iterations_list = {10};
            break;
        default: throw InvalidConfig("figure must be 3, 4 or 5");
    }
    return s;
}

}  // namespace sefdm
