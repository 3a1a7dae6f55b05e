#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lgsel/error.hpp"
#include "lgsel/harness.hpp"
#include "lgsel/pool_index.hpp"
#include "lgsel/providers.hpp"
#include "lgsel/scoring.hpp"

namespace lgsel::cli {
namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProviderFlags {
    std::string kind;  // "", "stub", "http"
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> vocab_size;
    std::string endpoint;
    std::size_t max_in_flight = 8;

    void add(CLI::App* app) {
        app->add_option("--provider", kind, "Frame source for prompts: stub | http")
            ->check(CLI::IsMember({"stub", "http"}));
        app->add_option("--seed", seed, "Seed for the stub provider (all randomness flows from it)");
        app->add_option("--vocab-size", vocab_size, "Stub vocabulary size (default: smallest covering the pools)");
        app->add_option("--endpoint", endpoint, "Inference endpoint URL (default: $LGSEL_ENDPOINT)");
        app->add_option("--max-in-flight", max_in_flight, "Concurrent HTTP requests")->check(CLI::PositiveNumber);
    }

    std::unique_ptr<FrameProvider> make(std::uint32_t required_vocab) const {
        if (kind.empty()) {
            if (seed || vocab_size || !endpoint.empty()) throw UsageError("provider flags given without --provider");
            return nullptr;
        }
        if (kind == "stub") {
            if (!seed) throw UsageError("--provider stub requires --seed");
            if (!endpoint.empty()) throw UsageError("--endpoint only applies to --provider http");
            return std::make_unique<StubProvider>(vocab_size.value_or(required_vocab), *seed);
        }
        if (seed || vocab_size) throw UsageError("--seed/--vocab-size only apply to --provider stub");
        std::string url = endpoint;
        if (url.empty()) {
            if (const char* env = std::getenv("LGSEL_ENDPOINT")) url = env;
        }
        if (url.empty()) throw UsageError("--provider http needs --endpoint or LGSEL_ENDPOINT");
        return std::make_unique<HttpProvider>(HttpProviderOptions{url, max_in_flight, std::chrono::seconds(60)});
    }
};

struct MethodFlags {
    std::string name;
    std::optional<std::uint32_t> kth;

    void add(CLI::App* app) {
        app->add_option("--method", name, "first | last | kth | average | sum | sample-average")->required();
        app->add_option("--kth", kth, "Token position for --method kth (1-based)");
    }

    Method get() const {
        try {
            return Method::parse(name, kth);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
};

struct DatasetFlags {
    std::string dataset;
    std::string tokenizer = "ref";
    bool no_prepend_space = false;

    void add(CLI::App* app) {
        app->add_option("--dataset", dataset, "Dataset file (JSON lines)")->required();
        app->add_option("--tokenizer", tokenizer, "ref, or a tokenizer-definition file for inline candidates");
        app->add_flag("--no-prepend-space", no_prepend_space, "Do not prefix candidate text with a space");
    }

    Dataset load() const {
        DatasetOptions opts;
        opts.prepend_space = !no_prepend_space;
        if (tokenizer != "ref") opts.tokenizer = std::make_shared<VocabTokenizer>(VocabTokenizer::load(tokenizer));
        return load_dataset(dataset, opts);
    }
};

struct EvalFlags {
    std::optional<std::size_t> top_k;
    bool use_mask = false;
    std::int64_t step = 0;
    bool use_template = false;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::string report;
    bool timing = false;

    void add(CLI::App* app, bool with_step, bool with_mask) {
        app->add_option("--top-k", top_k, "Ranking cutoff (default 1 for single-gold data, else 20)")
            ->check(CLI::PositiveNumber);
        if (with_mask) app->add_flag("--use-mask", use_mask, "Score only masked token positions");
        if (with_step) app->add_option("--step", step, "Output step to request")->check(CLI::NonNegativeNumber);
        app->add_flag("--template", use_template, "Ask the source to apply the chat template");
        app->add_option("--workers", workers, "Concurrent instances")->check(CLI::PositiveNumber);
        app->add_option("--report", report, "Write the JSON report here");
        app->add_flag("--timing", timing, "Include timing fields in the JSON report");
    }

    EvalConfig config(const Method& m) const {
        EvalConfig c;
        c.method = m;
        c.k = top_k;
        c.use_mask = use_mask;
        c.step = step;
        c.use_template = use_template;
        c.workers = workers;
        return c;
    }
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto end = s.find(',', pos);
        if (end == std::string::npos) end = s.size();
        if (end > pos) out.push_back(s.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

void write_report(const std::string& path, const std::string& contents) {
    if (path.empty()) return;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::io, "cannot write report '" + path + "'");
    f << contents;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Decoding-free candidate selection: score candidate pools from one step of logits", "lgsel"};
    app.require_subcommand(1);

    // pool build / pool mask
    auto* pool_cmd = app.add_subcommand("pool", "Build or annotate tokenized candidate pools");
    pool_cmd->require_subcommand(1);
    std::string cand_file, out_file, tokenizer = "ref", pool_file, mask_file;
    bool no_prepend_space = false;
    auto* build_cmd = pool_cmd->add_subcommand("build", "Tokenize a candidate file into a pool file");
    build_cmd->add_option("--candidates", cand_file, "Candidate file (JSON lines: id, text, mask?)")->required();
    build_cmd->add_option("--out", out_file, "Pool file to write")->required();
    build_cmd->add_option("--tokenizer", tokenizer, "ref, or a tokenizer-definition file");
    build_cmd->add_flag("--no-prepend-space", no_prepend_space, "Do not prefix candidate text with a space");
    auto* mask_cmd = pool_cmd->add_subcommand("mask", "Attach keyword masks to a pool");
    mask_cmd->add_option("--pool", pool_file, "Pool file")->required();
    mask_cmd->add_option("--masks", mask_file, "Mask file (JSON lines: id, positions)")->required();
    mask_cmd->add_option("--out", out_file, "Pool file to write")->required();

    // score
    auto* score_cmd = app.add_subcommand("score", "Rank a pool against one frame");
    std::string frame_file, prompt;
    MethodFlags score_method;
    ProviderFlags score_provider;
    std::size_t score_k = 1;
    bool score_mask = false, score_template = false;
    std::int64_t score_step = 0;
    std::string score_report;
    score_cmd->add_option("--pool", pool_file, "Pool file")->required();
    auto* frame_opt = score_cmd->add_option("--frame", frame_file, "Frame file (LGTS or readable)");
    auto* prompt_opt = score_cmd->add_option("--prompt", prompt, "Prompt to send to --provider");
    frame_opt->excludes(prompt_opt);
    score_method.add(score_cmd);
    score_cmd->add_option("--top-k", score_k, "Ranking cutoff")->check(CLI::PositiveNumber);
    score_cmd->add_flag("--use-mask", score_mask, "Score only masked token positions");
    score_cmd->add_option("--step", score_step, "Output step to request")->check(CLI::NonNegativeNumber);
    score_cmd->add_flag("--template", score_template, "Ask the source to apply the chat template");
    score_cmd->add_option("--report", score_report, "Write the ranking as JSON here");
    score_provider.add(score_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy / recall@k of an estimation method over a dataset");
    DatasetFlags eval_data;
    MethodFlags eval_method;
    EvalFlags eval_flags;
    ProviderFlags eval_provider;
    eval_data.add(eval_cmd);
    eval_method.add(eval_cmd);
    eval_flags.add(eval_cmd, true, true);
    eval_provider.add(eval_cmd);

    // eval-decode
    auto* decode_cmd = app.add_subcommand("eval-decode", "Accuracy of full-decoding outputs via answer extraction");
    DatasetFlags decode_data;
    std::string outputs_file, heads, decode_report;
    bool decode_timing = false;
    decode_data.add(decode_cmd);
    decode_cmd->add_option("--outputs", outputs_file, "Decode-outputs file (JSON lines: id, output, gen_seconds?)")
        ->required();
    decode_cmd->add_option("--heads", heads, "Comma-separated head labels (default A, B, C, ...)");
    decode_cmd->add_option("--report", decode_report, "Write the JSON report here");
    decode_cmd->add_flag("--timing", decode_timing, "Include timing fields in the JSON report");

    // sweep-steps
    auto* steps_cmd = app.add_subcommand("sweep-steps", "One report per output step");
    DatasetFlags steps_data;
    MethodFlags steps_method;
    EvalFlags steps_flags;
    ProviderFlags steps_provider;
    std::vector<std::int64_t> steps;
    steps_data.add(steps_cmd);
    steps_method.add(steps_cmd);
    steps_flags.add(steps_cmd, false, true);
    steps_provider.add(steps_cmd);
    steps_cmd->add_option("--steps", steps, "Output steps, comma-separated")->required()->delimiter(',')->check(
        CLI::NonNegativeNumber);

    // sweep-masks
    auto* masks_cmd = app.add_subcommand("sweep-masks", "Unmasked baseline plus one report per mask file");
    DatasetFlags masks_data;
    MethodFlags masks_method;
    EvalFlags masks_flags;
    ProviderFlags masks_provider;
    std::vector<std::string> mask_files;
    masks_data.add(masks_cmd);
    masks_method.add(masks_cmd);
    masks_flags.add(masks_cmd, true, false);
    masks_provider.add(masks_cmd);
    masks_cmd->add_option("--masks", mask_files, "Mask file; repeat for several")->required();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Time estimation against a simulated decode lap (single worker)");
    ProviderFlags bench_provider;
    std::string bench_methods = "first,last,average,sum,sample-average", bench_report;
    std::optional<std::uint32_t> bench_kth;
    BenchConfig bench_cfg;
    bench_cmd->add_option("--pool", pool_file, "Pool file")->required();
    bench_cmd->add_option("--methods", bench_methods, "Comma-separated methods");
    bench_cmd->add_option("--kth", bench_kth, "Token position when kth is listed");
    bench_cmd->add_option("--trials", bench_cfg.trials, "Trials (>= 3)")->check(CLI::Range(3, 1 << 20));
    bench_cmd->add_option("--decode-length", bench_cfg.decode_length, "Acquisitions in the simulated decode lap")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--top-k", bench_cfg.k, "Ranking cutoff")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--report", bench_report, "Write the JSON report here");
    bench_provider.add(bench_cmd);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
        if (target == &app) {
            // All-mode help stops one level down; spell out the pool subcommands too.
            out << app.help("", CLI::AppFormatMode::All) << '\n'
                << build_cmd->help("lgsel pool") << '\n'
                << mask_cmd->help("lgsel pool");
        } else {
            out << target->help();
        }
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "lgsel: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (build_cmd->parsed()) {
            CandidatePool pool;
            if (tokenizer == "ref") {
                pool = build_pool_reference(cand_file, !no_prepend_space);
            } else {
                pool = build_pool(cand_file, VocabTokenizer::load(tokenizer), !no_prepend_space);
            }
            for (const auto& group : validate_pool(pool, required_vocab(pool)).duplicate_sequences) {
                err << "lgsel: warning: identical token sequences:";
                for (const auto& id : group) err << ' ' << id;
                err << '\n';
            }
            save_pool(pool, out_file);
            out << "pool: " << pool.size() << " candidates, tokenizer " << pool.tokenizer_fingerprint << '\n';
        } else if (mask_cmd->parsed()) {
            const auto pool = attach_masks(load_pool(pool_file), mask_file);
            save_pool(pool, out_file);
            std::size_t masked = 0;
            for (const auto& c : pool.candidates) masked += c.mask.has_value();
            out << "pool: " << masked << " of " << pool.size() << " candidates masked\n";
        } else if (score_cmd->parsed()) {
            const Method method = score_method.get();
            const CandidatePool pool = load_pool(pool_file);
            LogitFrame frame;
            if (!frame_file.empty()) {
                if (!score_provider.kind.empty()) throw UsageError("--frame and --provider are mutually exclusive");
                frame = read_frame_file(frame_file);
            } else {
                if (prompt.empty()) throw UsageError("score needs --frame or --prompt with --provider");
                auto provider = score_provider.make(required_vocab(pool));
                if (!provider) throw UsageError("--prompt requires --provider");
                frame = provider->get_frame({prompt, score_step, score_template});
            }
            validate_pool(pool, frame.vocab_size);
            const auto scores = score_pool(frame, pool, method, score_mask);
            const auto ranking = top_k(scores, pool, score_k);
            nlohmann::ordered_json j;
            j["method"] = method.label();
            j["k"] = score_k;
            j["ranking"] = nlohmann::ordered_json::array();
            for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
                const auto& e = ranking.entries[r];
                out << (r + 1) << '\t' << e.id << '\t' << e.probability << '\n';
                j["ranking"].push_back({{"id", e.id}, {"ordinal", e.ordinal}, {"probability", e.probability}});
            }
            write_report(score_report, j.dump(2) + "\n");
        } else if (eval_cmd->parsed()) {
            const Method method = eval_method.get();
            const Dataset ds = eval_data.load();
            auto provider = eval_provider.make(ds.required_vocab());
            const auto report = run_eval(ds, provider.get(), eval_flags.config(method));
            print_table(out, std::span(&report, 1), true);
            write_report(eval_flags.report, report_json(report, eval_flags.timing));
        } else if (decode_cmd->parsed()) {
            const Dataset ds = decode_data.load();
            std::optional<HeadScheme> scheme;
            if (!heads.empty()) scheme = HeadScheme{split_list(heads)};
            const auto report = run_decode_eval(ds, outputs_file, scheme);
            print_table(out, std::span(&report, 1), true);
            write_report(decode_report, report_json(report, decode_timing));
        } else if (steps_cmd->parsed()) {
            const Method method = steps_method.get();
            const Dataset ds = steps_data.load();
            auto provider = steps_provider.make(ds.required_vocab());
            const auto reports = sweep_steps(ds, provider.get(), steps_flags.config(method), steps);
            print_table(out, reports, true);
            write_report(steps_flags.report, reports_json(reports, steps_flags.timing));
        } else if (masks_cmd->parsed()) {
            const Method method = masks_method.get();
            const Dataset ds = masks_data.load();
            auto provider = masks_provider.make(ds.required_vocab());
            std::vector<std::filesystem::path> files(mask_files.begin(), mask_files.end());
            const auto reports = sweep_masks(ds, provider.get(), masks_flags.config(method), files);
            print_table(out, reports, true);
            write_report(masks_flags.report, reports_json(reports, masks_flags.timing));
        } else if (bench_cmd->parsed()) {
            std::vector<Method> methods;
            for (const auto& name : split_list(bench_methods)) {
                try {
                    methods.push_back(Method::parse(name, name == "kth" ? bench_kth : std::nullopt));
                } catch (const Error& e) {
                    throw UsageError(e.what());
                }
            }
            const CandidatePool pool = load_pool(pool_file);
            auto provider = bench_provider.make(required_vocab(pool));
            if (!provider) throw UsageError("bench requires --provider");
            const auto report = bench(*provider, pool, methods, bench_cfg);
            print_bench_table(out, report);
            write_report(bench_report, bench_json(report));
        }
    } catch (const UsageError& e) {
        err << "lgsel: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "lgsel: " << e.what() << '\n';
        return e.error_class() == ErrorClass::provider ? kProvider : kData;
    } catch (const std::exception& e) {
        err << "lgsel: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace lgsel::cli
