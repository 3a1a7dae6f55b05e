#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgsel/core_types.hpp"
#include "lgsel/decode_map.hpp"
#include "lgsel/pool_index.hpp"
#include "lgsel/providers.hpp"

namespace lgsel {

/// A prompt (or precomputed frame) with its candidate pool and gold answers.
struct EvalInstance {
    std::string id;
    std::optional<std::string> prompt;
    std::optional<std::filesystem::path> frame;  // resolved against the dataset directory
    std::shared_ptr<const CandidatePool> pool;
    bool shared_pool = false;
    std::vector<std::string> gold;
};

struct Dataset {
    std::vector<EvalInstance> instances;
    std::filesystem::path source;

    bool single_gold() const;
    /// Smallest vocabulary that covers every pool token.
    std::uint32_t required_vocab() const;
};

struct DatasetOptions {
    /// Encodes inline candidates; when null a ReferenceTokenizer is fitted
    /// over all inline candidate texts in file order.
    std::shared_ptr<const TokenizerAdapter> tokenizer;
    bool prepend_space = true;
};

/// Line-delimited `{"id","prompt"?,"frame"?,"candidates"?,"pool"?,"gold"}`,
/// exactly one of prompt/frame and one of candidates/pool per line.
Dataset load_dataset(const std::filesystem::path& path, const DatasetOptions& options = {});

/// Attaches the mask file to every shared pool in the dataset. Each mask id
/// must exist in at least one pool. Inline-candidate instances are rejected.
Dataset with_masks(const Dataset& dataset, const std::filesystem::path& mask_file);

struct EvalConfig {
    Method method = Method::first();
    std::optional<std::size_t> k;  // default: 1 for single-gold datasets, else 20
    bool use_mask = false;
    std::int64_t step = 0;
    bool use_template = false;
    unsigned workers = 1;
    std::string label;
};

inline constexpr std::size_t kMultiGoldDefaultK = 20;
/// Runs abort once more than this fraction of instances fail.
inline constexpr double kMaxFailureFraction = 0.10;

struct MetricsReport {
    std::string method;
    std::string metric;  // "accuracy" or "recall@k"
    double value = 0.0;
    std::size_t count = 0;
    std::size_t failed = 0;
    double mean_elapsed_seconds = 0.0;  // acquisition + scoring
    double mean_acquire_seconds = 0.0;
    double mean_scoring_seconds = 0.0;
    std::int64_t step = 0;
    bool use_mask = false;
    bool use_template = false;
    std::size_t k = 1;
    std::string label;
    std::string provider;
};

/// |top-k ∩ gold| / |gold|.
double instance_recall(const Ranking& ranking, std::span<const std::string> gold);

std::size_t effective_k(const Dataset& dataset, const EvalConfig& config);

/// `provider` serves instances that carry a prompt; instances with a frame
/// path are read from disk. It may be null when every instance has a frame.
MetricsReport run_eval(const Dataset& dataset, FrameProvider* provider, const EvalConfig& config);

struct DecodeOutput {
    std::string id;
    std::string output;
    std::optional<double> gen_seconds;
};

std::vector<DecodeOutput> read_decode_outputs(const std::filesystem::path& path);

/// Accuracy of the full-decoding baseline. Outputs align to instances by id.
/// Without a scheme, each instance uses letters sized to its pool.
MetricsReport run_decode_eval(const Dataset& dataset, std::span<const DecodeOutput> outputs,
                              const std::optional<HeadScheme>& scheme = std::nullopt);
MetricsReport run_decode_eval(const Dataset& dataset, const std::filesystem::path& outputs_file,
                              const std::optional<HeadScheme>& scheme = std::nullopt);

std::vector<MetricsReport> sweep_steps(const Dataset& dataset, FrameProvider* provider, const EvalConfig& config,
                                       std::span<const std::int64_t> steps);

/// Baseline (unmasked) report followed by one masked report per file.
std::vector<MetricsReport> sweep_masks(const Dataset& dataset, FrameProvider* provider, const EvalConfig& config,
                                       std::span<const std::filesystem::path> mask_files);

struct BenchConfig {
    std::size_t trials = 5;
    std::size_t decode_length = 50;  // frame acquisitions in the simulated decode lap
    std::size_t k = 1;
    std::string prompt = "bench";
    bool use_template = false;
};

struct TimingStats {
    double mean = 0.0;
    double stddev = 0.0;
};

TimingStats timing_stats(std::span<const double> samples);

struct MethodTiming {
    std::string method;
    TimingStats scoring;
    double estimate_seconds = 0.0;  // acquisition mean + scoring mean
    double speedup = 0.0;           // decode lap mean / estimate_seconds
};

struct BenchReport {
    std::size_t trials = 0;
    std::size_t decode_length = 0;
    std::size_t pool_size = 0;
    std::string provider;
    TimingStats acquire;
    TimingStats decode_lap;
    std::vector<MethodTiming> methods;
};

/// Single-worker timing of frame acquisition, per-method scoring, and a
/// simulated decode lap of `decode_length` sequential acquisitions.
BenchReport bench(FrameProvider& provider, const CandidatePool& pool, std::span<const Method> methods,
                  const BenchConfig& config);

std::string report_json(const MetricsReport& report, bool include_timing);
std::string reports_json(std::span<const MetricsReport> reports, bool include_timing);
std::string bench_json(const BenchReport& report);

void print_table(std::ostream& out, std::span<const MetricsReport> reports, bool include_timing);
void print_bench_table(std::ostream& out, const BenchReport& report);

}  // namespace lgsel
