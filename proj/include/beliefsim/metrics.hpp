#pragma once
// Aggregation and serialization of evaluation results: belief histograms,
// per-ideology composition matrices, CTR/attrition summaries, CSV/JSON
// export, and the versioned population snapshot.
//
// Pure aggregation over immutable inputs; file writes are single-writer per
// path and idempotent (same input -> byte-identical file).

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "beliefsim/dynamics.hpp"

namespace beliefsim {

// --- record types filled by the harness ----------------------------------------

struct EpisodeStep {
    PoliticsCategory action = PoliticsCategory::Center;
    bool clicked = false;
    double reward = 0.0;
    double belief_after = 0.0;  // latent, for trajectories/debugging only
};

struct EpisodeRecord {
    std::vector<EpisodeStep> steps;
    double initial_belief = 0.0;
    double final_belief = 0.0;
    int attrition_step = -1;  // -1 = survived to the lifespan
    PoliticsCategory initial_ideology = PoliticsCategory::Center;
    int64_t user_id = -1;

    int64_t clicks() const {
        int64_t c = 0;
        for (const auto& s : steps) c += s.clicked;
        return c;
    }
    double total_reward() const {
        double r = 0.0;
        for (const auto& s : steps) r += s.reward;
        return r;
    }
};

// --- histogram -------------------------------------------------------------------

struct BeliefHistogram {
    std::vector<double> edges;    // bins+1 strictly increasing edges over [-1, 1]
    std::vector<int64_t> counts;  // bins entries
    int64_t total = 0;
};

/// Fixed uniform bins over [-1, 1]; the right edge value lands in the last bin.
inline BeliefHistogram belief_histogram(const std::vector<double>& beliefs, int bins = 50) {
    if (bins < 1) throw std::invalid_argument("belief_histogram: bins must be >= 1");
    BeliefHistogram h;
    h.edges.resize(static_cast<size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.edges[static_cast<size_t>(i)] = -1.0 + 2.0 * i / bins;
    h.counts.assign(static_cast<size_t>(bins), 0);
    for (double b : beliefs) {
        if (!(b >= -1.0 && b <= 1.0))
            throw std::invalid_argument("belief_histogram: belief outside [-1, 1]");
        int bin = static_cast<int>((b + 1.0) / 2.0 * bins);
        if (bin >= bins) bin = bins - 1;
        h.counts[static_cast<size_t>(bin)] += 1;
        h.total += 1;
    }
    return h;
}

// --- composition matrix -------------------------------------------------------------

/// Mean action frequencies per (initial ideology, step) over users still alive
/// at that step. Cells with zero survivors are undefined and exported empty.
struct CompositionMatrix {
    int max_steps = 0;
    struct Cell {
        std::array<double, 7> freq{};
        int64_t survivors = 0;
    };
    std::vector<Cell> cells;  // 7 * max_steps, ideology-major

    const Cell& at(int ideology_idx, int step) const {
        return cells[static_cast<size_t>(ideology_idx) * max_steps + step];
    }
};

inline CompositionMatrix composition_matrix(const std::vector<EpisodeRecord>& records) {
    CompositionMatrix m;
    for (const auto& r : records)
        m.max_steps = std::max(m.max_steps, static_cast<int>(r.steps.size()));
    m.cells.assign(static_cast<size_t>(7) * m.max_steps, {});
    for (const auto& r : records) {
        const int ideo = category_index(r.initial_ideology);
        for (size_t t = 0; t < r.steps.size(); ++t) {
            auto& cell = m.cells[static_cast<size_t>(ideo) * m.max_steps + t];
            cell.freq[static_cast<size_t>(category_index(r.steps[t].action))] += 1.0;
            cell.survivors += 1;
        }
    }
    for (auto& cell : m.cells) {
        if (cell.survivors > 0)
            for (double& f : cell.freq) f /= static_cast<double>(cell.survivors);
    }
    return m;
}

// --- summary -----------------------------------------------------------------------

struct SummaryRow {
    std::string agent;
    double ctr = 0.0;
    double attrition_rate = 0.0;
};

struct EvaluationReport {
    std::string agent_name;
    std::vector<EpisodeRecord> records;

    int64_t total_clicks() const {
        int64_t c = 0;
        for (const auto& r : records) c += r.clicks();
        return c;
    }
    int64_t total_recommendations() const {
        int64_t n = 0;
        for (const auto& r : records) n += static_cast<int64_t>(r.steps.size());
        return n;
    }
    double ctr() const {
        const int64_t n = total_recommendations();
        return n == 0 ? 0.0 : static_cast<double>(total_clicks()) / static_cast<double>(n);
    }
    double attrition_rate() const {
        if (records.empty()) return 0.0;
        int64_t attrited = 0;
        for (const auto& r : records) attrited += (r.attrition_step >= 0);
        return static_cast<double>(attrited) / static_cast<double>(records.size());
    }
};

inline std::vector<SummaryRow> summarize(const std::vector<EvaluationReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("summarize: no reports");
    std::vector<SummaryRow> rows;
    rows.reserve(reports.size());
    for (const auto& r : reports) {
        if (r.records.empty()) throw std::invalid_argument("summarize: empty report");
        rows.push_back(SummaryRow{r.agent_name, r.ctr(), r.attrition_rate()});
    }
    return rows;
}

// --- number formatting ----------------------------------------------------------------

/// Shortest decimal form that parses back to the identical double.
inline std::string fmt_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

// --- population snapshot ----------------------------------------------------------------

struct Population {
    uint64_t generation_seed = 0;
    std::vector<UserState> users;
};

namespace detail {

inline constexpr uint32_t kPopulationMagic = 0x4f505342;  // "BSPO"
inline constexpr uint32_t kPopulationVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("snapshot: truncated file");
    return v;
}

}  // namespace detail

/// Binary layout (little-endian): magic u32, version u32, generation seed u64,
/// user count u64, then per user 8 doubles (belief, polarization factor,
/// malleability, open-mindedness, engagement, satisfaction, growth rate,
/// decay rate) and one alive byte.
inline void save_population(const std::filesystem::path& path, const Population& pop) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_population: cannot open " + path.string());
    detail::write_pod(os, detail::kPopulationMagic);
    detail::write_pod(os, detail::kPopulationVersion);
    detail::write_pod(os, pop.generation_seed);
    detail::write_pod(os, static_cast<uint64_t>(pop.users.size()));
    for (const UserState& u : pop.users) {
        detail::write_pod(os, u.belief);
        detail::write_pod(os, u.polarization_factor);
        detail::write_pod(os, u.malleability);
        detail::write_pod(os, u.open_mindedness);
        detail::write_pod(os, u.engagement);
        detail::write_pod(os, u.satisfaction);
        detail::write_pod(os, u.growth_rate);
        detail::write_pod(os, u.decay_rate);
        detail::write_pod(os, static_cast<uint8_t>(u.alive ? 1 : 0));
    }
    if (!os) throw std::runtime_error("save_population: write failed for " + path.string());
}

inline Population load_population(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_population: cannot open " + path.string());
    if (detail::read_pod<uint32_t>(is) != detail::kPopulationMagic)
        throw std::runtime_error("load_population: not a population snapshot: " + path.string());
    const uint32_t version = detail::read_pod<uint32_t>(is);
    if (version != detail::kPopulationVersion)
        throw std::runtime_error("load_population: unsupported snapshot version " +
                                 std::to_string(version));
    Population pop;
    pop.generation_seed = detail::read_pod<uint64_t>(is);
    const uint64_t count = detail::read_pod<uint64_t>(is);
    pop.users.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        UserState u;
        u.belief = detail::read_pod<double>(is);
        u.polarization_factor = detail::read_pod<double>(is);
        u.malleability = detail::read_pod<double>(is);
        u.open_mindedness = detail::read_pod<double>(is);
        u.engagement = detail::read_pod<double>(is);
        u.satisfaction = detail::read_pod<double>(is);
        u.growth_rate = detail::read_pod<double>(is);
        u.decay_rate = detail::read_pod<double>(is);
        u.alive = detail::read_pod<uint8_t>(is) != 0;
        pop.users.push_back(u);
    }
    return pop;
}

// --- CSV / report export -------------------------------------------------------------------

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    return os;
}

inline void write_histogram_csv(const std::filesystem::path& path, const BeliefHistogram& h) {
    std::ofstream os = open_out(path);
    os << "bin_lo,bin_hi,count\n";
    for (size_t i = 0; i < h.counts.size(); ++i)
        os << fmt_double(h.edges[i]) << ',' << fmt_double(h.edges[i + 1]) << ',' << h.counts[i]
           << '\n';
}

inline void write_composition_csv(const std::filesystem::path& path, const CompositionMatrix& m) {
    std::ofstream os = open_out(path);
    os << "ideology,step,f1,f2,f3,f4,f5,f6,f7,survivors\n";
    for (int ideo = 0; ideo < 7; ++ideo) {
        for (int t = 0; t < m.max_steps; ++t) {
            const auto& cell = m.at(ideo, t);
            os << category_name(category_from_index(ideo)) << ',' << t;
            for (int k = 0; k < 7; ++k) {
                os << ',';
                if (cell.survivors > 0) os << fmt_double(cell.freq[static_cast<size_t>(k)]);
                // zero survivors: leave the fields empty ("grey regions")
            }
            os << ',' << cell.survivors << '\n';
        }
    }
}

inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<SummaryRow>& rows) {
    std::ofstream os = open_out(path);
    os << "agent,ctr,attrition_rate\n";
    for (const auto& r : rows)
        os << r.agent << ',' << fmt_double(r.ctr) << ',' << fmt_double(r.attrition_rate) << '\n';
}

inline void write_trajectories_csv(const std::filesystem::path& path,
                                   const std::vector<EpisodeRecord>& records, int stride) {
    if (stride < 1) stride = 1;
    std::ofstream os = open_out(path);
    os << "user_id,step,belief\n";
    for (const auto& r : records) {
        os << r.user_id << ",0," << fmt_double(r.initial_belief) << '\n';
        for (size_t t = 0; t < r.steps.size(); ++t) {
            if ((t + 1) % static_cast<size_t>(stride) == 0 || t + 1 == r.steps.size())
                os << r.user_id << ',' << (t + 1) << ',' << fmt_double(r.steps[t].belief_after)
                   << '\n';
        }
    }
}

/// The full per-run report file set. Existing files are overwritten.
inline void export_report(const EvaluationReport& report, const std::filesystem::path& outdir,
                          int trajectory_stride = 10, int histogram_bins = 50) {
    std::vector<double> initial, final_;
    initial.reserve(report.records.size());
    final_.reserve(report.records.size());
    for (const auto& r : report.records) {
        initial.push_back(r.initial_belief);
        final_.push_back(r.final_belief);
    }
    write_histogram_csv(outdir / "belief_hist_initial.csv", belief_histogram(initial, histogram_bins));
    write_histogram_csv(outdir / "belief_hist_final.csv", belief_histogram(final_, histogram_bins));
    write_composition_csv(outdir / "composition.csv", composition_matrix(report.records));
    write_summary_csv(outdir / "eval_summary.csv", summarize({report}));
    write_trajectories_csv(outdir / "trajectories.csv", report.records, trajectory_stride);
}

}  // namespace beliefsim
