#include "lgsel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "detail/util.hpp"
#include "lgsel/error.hpp"
#include "lgsel/scoring.hpp"

namespace lgsel {
namespace {

using detail::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> string_array(const json& obj, const char* key, const std::string& where, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) {
        throw Error(ErrorKind::parse_error, where + ": \"" + key + "\" must be an array of strings", line);
    }
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw Error(ErrorKind::parse_error, where + ": \"" + key + "\" must hold strings", line);
        out.push_back(v.get<std::string>());
    }
    return out;
}

struct PendingInline {
    std::size_t instance = 0;
    std::vector<CandidateRecord> records;
};

struct InstanceResult {
    bool ok = false;
    double value = 0.0;
    double acquire_seconds = 0.0;
    double scoring_seconds = 0.0;
    std::optional<Error> error;
};

}  // namespace

bool Dataset::single_gold() const {
    return std::all_of(instances.begin(), instances.end(), [](const auto& i) { return i.gold.size() == 1; });
}

std::uint32_t Dataset::required_vocab() const {
    std::uint32_t v = 1;
    std::unordered_set<const CandidatePool*> seen;
    for (const auto& inst : instances) {
        if (seen.insert(inst.pool.get()).second) v = std::max(v, lgsel::required_vocab(*inst.pool));
    }
    return v;
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetOptions& options) {
    Dataset ds;
    ds.source = path;
    const auto base = path.parent_path();
    std::map<std::filesystem::path, std::shared_ptr<const CandidatePool>> pools;
    std::vector<PendingInline> pending;
    std::unordered_set<std::string> ids;
    const std::string src = path.string();

    detail::for_each_json_line(path, [&](std::size_t line, const json& obj) {
        const std::string where = src + ":" + std::to_string(line);
        EvalInstance inst;
        auto id = obj.find("id");
        if (id == obj.end() || !id->is_string()) throw Error(ErrorKind::parse_error, where + ": missing \"id\"", line);
        inst.id = id->get<std::string>();
        if (!ids.insert(inst.id).second) {
            throw Error(ErrorKind::duplicate_id, where + ": duplicate instance id '" + inst.id + "'", line, inst.id);
        }
        const bool has_prompt = obj.contains("prompt");
        const bool has_frame = obj.contains("frame");
        if (has_prompt == has_frame) {
            throw Error(ErrorKind::parse_error, where + ": exactly one of \"prompt\" and \"frame\" is required", line,
                        inst.id);
        }
        if (has_prompt) {
            if (!obj["prompt"].is_string()) throw Error(ErrorKind::parse_error, where + ": prompt must be a string", line);
            inst.prompt = obj["prompt"].get<std::string>();
        } else {
            if (!obj["frame"].is_string()) throw Error(ErrorKind::parse_error, where + ": frame must be a path", line);
            std::filesystem::path fp = obj["frame"].get<std::string>();
            inst.frame = fp.is_absolute() ? fp : base / fp;
        }
        const bool has_cands = obj.contains("candidates");
        const bool has_pool = obj.contains("pool");
        if (has_cands == has_pool) {
            throw Error(ErrorKind::parse_error, where + ": exactly one of \"candidates\" and \"pool\" is required",
                        line, inst.id);
        }
        inst.gold = string_array(obj, "gold", where, line);
        if (inst.gold.empty()) throw Error(ErrorKind::parse_error, where + ": gold set is empty", line, inst.id);

        if (has_pool) {
            if (!obj["pool"].is_string()) throw Error(ErrorKind::parse_error, where + ": pool must be a path", line);
            std::filesystem::path pp = obj["pool"].get<std::string>();
            pp = pp.is_absolute() ? pp : base / pp;
            auto key = std::filesystem::weakly_canonical(pp);
            auto it = pools.find(key);
            if (it == pools.end()) it = pools.emplace(key, std::make_shared<const CandidatePool>(load_pool(pp))).first;
            inst.pool = it->second;
            inst.shared_pool = true;
        } else {
            const auto& cands = obj["candidates"];
            if (!cands.is_array()) throw Error(ErrorKind::parse_error, where + ": candidates must be an array", line);
            PendingInline p{ds.instances.size(), {}};
            for (const auto& c : cands) {
                if (!c.is_object() || !c.contains("id") || !c["id"].is_string() || !c.contains("text") ||
                    !c["text"].is_string()) {
                    throw Error(ErrorKind::parse_error, where + ": candidates need string id and text", line, inst.id);
                }
                p.records.push_back({c["id"].get<std::string>(), c["text"].get<std::string>(), std::nullopt, line});
            }
            if (inst.gold.size() != 1) {
                throw Error(ErrorKind::parse_error, where + ": inline-candidate instances take exactly one gold id",
                            line, inst.id);
            }
            pending.push_back(std::move(p));
        }
        ds.instances.push_back(std::move(inst));
    });
    if (ds.instances.empty()) throw Error(ErrorKind::parse_error, src + ": dataset has no instances");

    if (!pending.empty()) {
        std::shared_ptr<const TokenizerAdapter> tok = options.tokenizer;
        if (!tok) {
            std::vector<std::string> texts;
            for (const auto& p : pending) {
                for (const auto& r : p.records) texts.push_back(r.text);
            }
            tok = std::make_shared<ReferenceTokenizer>(ReferenceTokenizer::fit(texts, options.prepend_space));
        }
        for (auto& p : pending) {
            auto& inst = ds.instances[p.instance];
            try {
                inst.pool = std::make_shared<const CandidatePool>(build_pool(p.records, *tok, options.prepend_space));
            } catch (const Error& e) {
                throw Error(e.kind(), "instance '" + inst.id + "': " + e.what(), e.index(), inst.id);
            }
        }
    }
    for (const auto& inst : ds.instances) {
        for (const auto& g : inst.gold) {
            if (!inst.pool->ordinal_of(g)) {
                throw Error(ErrorKind::unknown_id, "instance '" + inst.id + "': gold id '" + g + "' is not in its pool",
                            std::nullopt, inst.id);
            }
        }
    }
    return ds;
}

Dataset with_masks(const Dataset& dataset, const std::filesystem::path& mask_file) {
    const auto masks = read_mask_file(mask_file);
    std::unordered_map<const CandidatePool*, std::shared_ptr<const CandidatePool>> replaced;
    std::unordered_set<std::string> used;
    for (const auto& inst : dataset.instances) {
        if (!inst.shared_pool) {
            throw Error(ErrorKind::invalid_argument,
                        "masks apply to shared pools; instance '" + inst.id + "' has inline candidates", std::nullopt,
                        inst.id);
        }
        if (replaced.contains(inst.pool.get())) continue;
        std::vector<MaskRecord> mine;
        for (const auto& m : masks) {
            if (inst.pool->ordinal_of(m.id)) {
                mine.push_back(m);
                used.insert(m.id);
            }
        }
        replaced.emplace(inst.pool.get(), std::make_shared<const CandidatePool>(attach_masks(*inst.pool, mine)));
    }
    for (const auto& m : masks) {
        if (!used.contains(m.id)) {
            throw Error(ErrorKind::unknown_id, mask_file.string() + ":" + std::to_string(m.line) +
                                                   ": unknown candidate '" + m.id + "'",
                        m.line, m.id);
        }
    }
    Dataset out = dataset;
    for (auto& inst : out.instances) inst.pool = replaced.at(inst.pool.get());
    return out;
}

double instance_recall(const Ranking& ranking, std::span<const std::string> gold) {
    if (gold.empty()) throw Error(ErrorKind::invalid_argument, "gold set is empty");
    std::unordered_set<std::string_view> gold_set(gold.begin(), gold.end());
    std::size_t hits = 0;
    for (const auto& e : ranking.entries) hits += gold_set.count(e.id);
    return static_cast<double>(hits) / static_cast<double>(gold_set.size());
}

std::size_t effective_k(const Dataset& dataset, const EvalConfig& config) {
    if (config.k) {
        if (*config.k < 1) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
        return *config.k;
    }
    return dataset.single_gold() ? 1 : kMultiGoldDefaultK;
}

MetricsReport run_eval(const Dataset& dataset, FrameProvider* provider, const EvalConfig& config) {
    if (dataset.instances.empty()) throw Error(ErrorKind::invalid_argument, "dataset has no instances");
    if (config.step < 0) throw Error(ErrorKind::negative_step, "step must be >= 0");
    const std::size_t k = effective_k(dataset, config);
    const std::size_t n = dataset.instances.size();
    std::vector<InstanceResult> results(n);
    FileProvider files;

    auto evaluate = [&](std::size_t i) {
        const auto& inst = dataset.instances[i];
        auto& r = results[i];
        try {
            auto start = Clock::now();
            LogitFrame frame;
            if (inst.frame) {
                frame = files.get_frame(*inst.frame);
            } else {
                if (!provider) {
                    throw Error(ErrorKind::invalid_argument, "instance '" + inst.id + "' has a prompt but no provider");
                }
                frame = provider->get_frame({*inst.prompt, config.step, config.use_template});
            }
            r.acquire_seconds = seconds_since(start);
            start = Clock::now();
            const auto scores = score_pool(frame, *inst.pool, config.method, config.use_mask);
            const auto ranking = top_k(scores, *inst.pool, k);
            r.value = instance_recall(ranking, inst.gold);
            r.scoring_seconds = seconds_since(start);
            r.ok = true;
        } catch (const Error& e) {
            r.error = Error(e.kind(), "instance '" + inst.id + "': " + e.what(), e.index(), inst.id);
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) evaluate(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) evaluate(i);
            });
        }
    }

    MetricsReport report;
    report.method = config.method.label();
    report.step = config.step;
    report.use_mask = config.use_mask;
    report.use_template = config.use_template;
    report.k = k;
    report.label = config.label;
    report.provider = provider ? provider->describe() : "file";
    report.metric = (dataset.single_gold() && k == 1) ? "accuracy" : "recall@" + std::to_string(k);

    double sum = 0.0, acquire = 0.0, scoring = 0.0;
    const Error* first_error = nullptr;
    for (const auto& r : results) {
        if (!r.ok) {
            ++report.failed;
            if (!first_error) first_error = &*r.error;
            continue;
        }
        ++report.count;
        sum += r.value;
        acquire += r.acquire_seconds;
        scoring += r.scoring_seconds;
    }
    if (static_cast<double>(report.failed) > kMaxFailureFraction * static_cast<double>(n) || report.count == 0) {
        const std::string msg = std::to_string(report.failed) + " of " + std::to_string(n) +
                                " instances failed; first: " + first_error->what();
        // A run that dies on the provider is reported as a provider failure.
        if (first_error->error_class() == ErrorClass::provider) throw Error(first_error->kind(), msg);
        throw Error(ErrorKind::too_many_failures, msg);
    }
    const auto count = static_cast<double>(report.count);
    report.value = sum / count;
    report.mean_acquire_seconds = acquire / count;
    report.mean_scoring_seconds = scoring / count;
    report.mean_elapsed_seconds = report.mean_acquire_seconds + report.mean_scoring_seconds;
    return report;
}

std::vector<DecodeOutput> read_decode_outputs(const std::filesystem::path& path) {
    std::vector<DecodeOutput> outputs;
    const std::string src = path.string();
    detail::for_each_json_line(path, [&](std::size_t line, const json& obj) {
        const std::string where = src + ":" + std::to_string(line);
        DecodeOutput o;
        if (!obj.contains("id") || !obj["id"].is_string()) throw Error(ErrorKind::parse_error, where + ": missing id", line);
        if (!obj.contains("output") || !obj["output"].is_string()) {
            throw Error(ErrorKind::parse_error, where + ": missing output text", line);
        }
        o.id = obj["id"].get<std::string>();
        o.output = obj["output"].get<std::string>();
        if (auto g = obj.find("gen_seconds"); g != obj.end()) {
            if (!g->is_number() || g->get<double>() < 0) {
                throw Error(ErrorKind::parse_error, where + ": gen_seconds must be a non-negative number", line);
            }
            o.gen_seconds = g->get<double>();
        }
        outputs.push_back(std::move(o));
    });
    return outputs;
}

MetricsReport run_decode_eval(const Dataset& dataset, std::span<const DecodeOutput> outputs,
                              const std::optional<HeadScheme>& scheme) {
    std::unordered_map<std::string_view, const DecodeOutput*> by_id;
    for (const auto& o : outputs) {
        if (!by_id.emplace(o.id, &o).second) {
            throw Error(ErrorKind::alignment, "decode output id '" + o.id + "' appears twice", std::nullopt, o.id);
        }
    }
    std::vector<std::string> texts;
    std::vector<DecodeItem> items;
    double gen_total = 0.0;
    std::size_t gen_count = 0;
    for (const auto& inst : dataset.instances) {
        auto it = by_id.find(inst.id);
        if (it == by_id.end()) {
            throw Error(ErrorKind::alignment, "no decode output for instance '" + inst.id + "'", std::nullopt, inst.id);
        }
        texts.push_back(it->second->output);
        if (it->second->gen_seconds) {
            gen_total += *it->second->gen_seconds;
            ++gen_count;
        }
        DecodeItem item;
        for (const auto& c : inst.pool->candidates) {
            item.candidate_ids.push_back(c.id);
            item.candidate_texts.push_back(c.text);
        }
        item.gold = inst.gold;
        items.push_back(std::move(item));
    }
    if (by_id.size() != dataset.instances.size()) {
        throw Error(ErrorKind::alignment, "decode outputs contain ids that are not in the dataset");
    }
    MetricsReport report;
    report.method = "decode";
    report.metric = "accuracy";
    report.value = decode_accuracy(texts, items, scheme);
    report.count = items.size();
    report.k = 1;
    report.provider = "decode-outputs";
    report.mean_elapsed_seconds = gen_count ? gen_total / static_cast<double>(gen_count) : 0.0;
    return report;
}

MetricsReport run_decode_eval(const Dataset& dataset, const std::filesystem::path& outputs_file,
                              const std::optional<HeadScheme>& scheme) {
    const auto outputs = read_decode_outputs(outputs_file);
    return run_decode_eval(dataset, outputs, scheme);
}

std::vector<MetricsReport> sweep_steps(const Dataset& dataset, FrameProvider* provider, const EvalConfig& config,
                                       std::span<const std::int64_t> steps) {
    std::vector<MetricsReport> reports;
    for (auto step : steps) {
        EvalConfig c = config;
        c.step = step;
        c.label = "step=" + std::to_string(step);
        try {
            reports.push_back(run_eval(dataset, provider, c));
        } catch (const Error& e) {
            throw Error(e.kind(), "step " + std::to_string(step) + ": " + e.what(), e.index(), e.subject());
        }
    }
    return reports;
}

std::vector<MetricsReport> sweep_masks(const Dataset& dataset, FrameProvider* provider, const EvalConfig& config,
                                       std::span<const std::filesystem::path> mask_files) {
    std::vector<MetricsReport> reports;
    EvalConfig base = config;
    base.use_mask = false;
    base.label = "baseline";
    reports.push_back(run_eval(dataset, provider, base));
    for (const auto& file : mask_files) {
        EvalConfig c = config;
        c.use_mask = true;
        c.label = file.filename().string();
        try {
            const Dataset masked = with_masks(dataset, file);
            reports.push_back(run_eval(masked, provider, c));
        } catch (const Error& e) {
            throw Error(e.kind(), "mask file " + file.string() + ": " + e.what(), e.index(), e.subject());
        }
    }
    return reports;
}

TimingStats timing_stats(std::span<const double> samples) {
    TimingStats s;
    if (samples.empty()) return s;
    for (double v : samples) s.mean += v;
    s.mean /= static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double v : samples) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(samples.size() - 1));
    }
    return s;
}

BenchReport bench(FrameProvider& provider, const CandidatePool& pool, std::span<const Method> methods,
                  const BenchConfig& config) {
    if (config.trials < 3) throw Error(ErrorKind::invalid_argument, "bench needs at least 3 trials");
    if (config.decode_length < 1) throw Error(ErrorKind::invalid_argument, "decode length must be >= 1");
    if (methods.empty()) throw Error(ErrorKind::invalid_argument, "bench needs at least one method");

    std::vector<double> acquire, lap;
    std::vector<std::vector<double>> scoring(methods.size());
    for (std::size_t t = 0; t < config.trials; ++t) {
        const std::string prompt = config.prompt + "#" + std::to_string(t);
        auto start = Clock::now();
        const LogitFrame frame = provider.get_frame({prompt, 0, config.use_template});
        acquire.push_back(seconds_since(start));
        if (t == 0) validate_pool(pool, frame.vocab_size);

        for (std::size_t m = 0; m < methods.size(); ++m) {
            start = Clock::now();
            const auto scores = score_pool(frame, pool, methods[m]);
            const auto ranking = top_k(scores, pool, config.k);
            scoring[m].push_back(seconds_since(start));
            if (ranking.entries.empty()) throw Error(ErrorKind::invalid_argument, "empty ranking");
        }

        start = Clock::now();
        for (std::size_t s = 0; s < config.decode_length; ++s) {
            (void)provider.get_frame({prompt, static_cast<std::int64_t>(s), config.use_template});
        }
        lap.push_back(seconds_since(start));
    }

    BenchReport report;
    report.trials = config.trials;
    report.decode_length = config.decode_length;
    report.pool_size = pool.size();
    report.provider = provider.describe();
    report.acquire = timing_stats(acquire);
    report.decode_lap = timing_stats(lap);
    for (std::size_t m = 0; m < methods.size(); ++m) {
        MethodTiming mt;
        mt.method = methods[m].label();
        mt.scoring = timing_stats(scoring[m]);
        mt.estimate_seconds = report.acquire.mean + mt.scoring.mean;
        mt.speedup = mt.estimate_seconds > 0 ? report.decode_lap.mean / mt.estimate_seconds : 0.0;
        report.methods.push_back(std::move(mt));
    }
    return report;
}

namespace {

nlohmann::ordered_json report_object(const MetricsReport& r, bool include_timing) {
    nlohmann::ordered_json o;
    o["method"] = r.method;
    o["metric"] = r.metric;
    o["value"] = r.value;
    o["count"] = r.count;
    o["failed"] = r.failed;
    if (include_timing) {
        o["mean_elapsed_seconds"] = r.mean_elapsed_seconds;
        o["mean_acquire_seconds"] = r.mean_acquire_seconds;
        o["mean_scoring_seconds"] = r.mean_scoring_seconds;
    }
    o["config"] = {{"step", r.step}, {"mask", r.use_mask}, {"template", r.use_template}, {"k", r.k}};
    if (!r.label.empty()) o["label"] = r.label;
    o["provider"] = r.provider;
    return o;
}

nlohmann::ordered_json stats_object(const TimingStats& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

}  // namespace

std::string report_json(const MetricsReport& report, bool include_timing) {
    return report_object(report, include_timing).dump(2) + "\n";
}

std::string reports_json(std::span<const MetricsReport> reports, bool include_timing) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_object(r, include_timing));
    nlohmann::ordered_json o;
    o["reports"] = std::move(arr);
    return o.dump(2) + "\n";
}

std::string bench_json(const BenchReport& report) {
    nlohmann::ordered_json o;
    o["trials"] = report.trials;
    o["decode_length"] = report.decode_length;
    o["pool_size"] = report.pool_size;
    o["provider"] = report.provider;
    o["acquire_seconds"] = stats_object(report.acquire);
    o["decode_lap_seconds"] = stats_object(report.decode_lap);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : report.methods) {
        nlohmann::ordered_json e;
        e["method"] = m.method;
        e["scoring_seconds"] = stats_object(m.scoring);
        e["estimate_seconds"] = m.estimate_seconds;
        e["speedup"] = m.speedup;
        arr.push_back(std::move(e));
    }
    o["methods"] = std::move(arr);
    return o.dump(2) + "\n";
}

void print_table(std::ostream& out, std::span<const MetricsReport> reports, bool include_timing) {
    std::ostringstream s;
    s << std::left << std::setw(16) << "label" << std::setw(16) << "method" << std::setw(12) << "metric"
      << std::right << std::setw(9) << "value" << std::setw(8) << "count" << std::setw(8) << "failed"
      << std::setw(6) << "step" << std::setw(6) << "mask";
    if (include_timing) s << std::setw(14) << "sec/inst" << std::setw(14) << "score sec";
    s << '\n';
    for (const auto& r : reports) {
        s << std::left << std::setw(16) << (r.label.empty() ? "-" : r.label) << std::setw(16) << r.method
          << std::setw(12) << r.metric << std::right << std::fixed << std::setprecision(4) << std::setw(9) << r.value
          << std::setw(8) << r.count << std::setw(8) << r.failed << std::setw(6) << r.step << std::setw(6)
          << (r.use_mask ? "yes" : "no");
        if (include_timing) {
            s << std::scientific << std::setprecision(3) << std::setw(14) << r.mean_elapsed_seconds << std::setw(14)
              << r.mean_scoring_seconds;
        }
        s << '\n';
    }
    out << s.str();
}

void print_bench_table(std::ostream& out, const BenchReport& report) {
    std::ostringstream s;
    s << "pool size " << report.pool_size << ", " << report.trials << " trials, provider " << report.provider << '\n';
    s << std::scientific << std::setprecision(3);
    s << "frame acquisition   " << report.acquire.mean << " s  (sd " << report.acquire.stddev << ")\n";
    s << "decode lap (L=" << report.decode_length << ")  " << report.decode_lap.mean << " s  (sd "
      << report.decode_lap.stddev << ")\n";
    s << std::left << std::setw(18) << "method" << std::right << std::setw(14) << "scoring s" << std::setw(14)
      << "sd" << std::setw(14) << "estimate s" << std::setw(10) << "speedup" << '\n';
    for (const auto& m : report.methods) {
        s << std::left << std::setw(18) << m.method << std::right << std::setw(14) << m.scoring.mean << std::setw(14)
          << m.scoring.stddev << std::setw(14) << m.estimate_seconds << std::fixed << std::setprecision(1)
          << std::setw(9) << m.speedup << "x" << std::scientific << std::setprecision(3) << '\n';
    }
    out << s.str();
}

}  // namespace lgsel
