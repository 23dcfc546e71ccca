#include "ldadam/accounting.hpp"
#include "ldadam/runner.hpp"
#include "ldadam/selfcheck.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

// 0 success, 1 usage/config error, 2 divergence, 3 monitor/check violation
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitViolation = 3;

std::size_t thread_count(std::size_t flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("LDADAM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw std::runtime_error("no seeds given");
    return seeds;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
    ldadam::ConfigMap map = ldadam::ConfigMap::parse_file(config_path);
    ldadam::ExperimentConfig cfg = ldadam::parse_experiment_config(map);
    if (!out_override.empty()) cfg.output_path = out_override;

    ldadam::RunResult result = ldadam::run_experiment(cfg);
    if (!cfg.output_path.empty()) {
        ldadam::write_trajectory_csv(cfg.output_path, result.records);
        if (!result.monitor_summaries.empty()) {
            std::ofstream mon(cfg.output_path + ".monitors.csv", std::ios::binary);
            if (!mon) throw std::runtime_error("cannot open monitor CSV next to output");
            mon << ldadam::monitor_csv(cfg.label, result.monitor_summaries);
        }
    }
    std::cout << ldadam::summary_text(cfg, result);
    if (result.diverged) return kExitDiverged;
    if (!result.monitors_clean()) return kExitViolation;
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& seeds_text,
                const std::string& out_path, std::size_t threads) {
    std::vector<ldadam::ExperimentConfig> configs;
    for (const auto& path : config_paths) {
        ldadam::ConfigMap map = ldadam::ConfigMap::parse_file(path);
        configs.push_back(ldadam::parse_experiment_config(map));
        configs.back().output_path.clear(); // compare keeps per-run CSVs off
    }
    const auto seeds = parse_seeds(seeds_text);
    auto rows = ldadam::compare(configs, seeds, thread_count(threads));
    std::cout << ldadam::compare_table(rows);
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open '" + out_path + "'");
        out << ldadam::compare_csv(rows);
    }
    return kExitOk;
}

int cmd_memory(const std::string& model_name, const std::string& spec_path,
               const std::string& optimizer, std::size_t rank, unsigned bytes, bool verbose) {
    ldadam::ModelSpec custom;
    const ldadam::ModelSpec* model = nullptr;
    if (!spec_path.empty()) {
        ldadam::ConfigMap map = ldadam::ConfigMap::parse_file(spec_path);
        custom = ldadam::model_spec_from_config(map);
        model = &custom;
    } else {
        model = &ldadam::builtin_model(model_name);
    }
    const auto kind = ldadam::optimizer_kind_from_string(optimizer);
    const std::uint64_t tokens = ldadam::optimizer_state_tokens(*model, kind, rank);
    const auto est = ldadam::memory_bytes(tokens, bytes);
    std::printf("model %s, optimizer %s", model->name.c_str(), optimizer.c_str());
    if (kind != ldadam::OptimizerKind::adam) std::printf(" (r=%zu)", rank);
    std::printf("\noptimizer states: %llu tokens, %llu bytes, %.2f GB\n",
                static_cast<unsigned long long>(tokens),
                static_cast<unsigned long long>(est.bytes), est.gb);
    if (verbose) {
        std::printf("  divisor 1024^3: %.4f GB\n  divisor 10^9:   %.4f GB (SI)\n", est.gb,
                    est.gb_si);
        std::printf("  weights: %llu tokens\n",
                    static_cast<unsigned long long>(model->weight_tokens()));
        for (const auto& layer : model->layers) {
            ldadam::ModelSpec single{model->name, {layer}};
            const std::uint64_t t = ldadam::optimizer_state_tokens(single, kind, rank);
            std::printf("  %-24s %zux%zu x%-4zu %12llu tokens\n", layer.name.c_str(), layer.n,
                        layer.m, layer.count, static_cast<unsigned long long>(t));
        }
    }
    return kExitOk;
}

int cmd_dump_data(const std::string& config_path, const std::string& out_path) {
    ldadam::ConfigMap map = ldadam::ConfigMap::parse_file(config_path);
    ldadam::ExperimentConfig cfg = ldadam::parse_experiment_config(map);
    auto problem = ldadam::build_problem(cfg);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "'");
    problem->dump_data(out);
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LDAdam: low-dimensional adaptive optimization workbench"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    std::string run_config, run_out;
    run->add_option("--config", run_config, "experiment config file")->required();
    run->add_option("--out", run_out, "trajectory CSV path (overrides config `output`)");

    auto* cmp = app.add_subcommand("compare", "run several configs over shared seeds");
    std::vector<std::string> cmp_configs;
    std::string cmp_seeds = "1,2,3,4,5", cmp_out;
    std::size_t cmp_threads = 0;
    cmp->add_option("--config", cmp_configs, "experiment config files")->required()
        ->expected(-1);
    cmp->add_option("--seeds", cmp_seeds, "comma-separated seed list");
    cmp->add_option("--out", cmp_out, "comparison CSV path");
    cmp->add_option("--threads", cmp_threads, "worker threads (default 1 or LDADAM_THREADS)");

    auto* mem = app.add_subcommand("memory", "optimizer-state memory accounting");
    std::string mem_model = "llama2-7b", mem_spec, mem_opt = "ldadam";
    std::size_t mem_rank = 32;
    unsigned mem_bytes = 2;
    bool mem_verbose = false;
    mem->add_option("--model", mem_model, "builtin model name");
    mem->add_option("--spec", mem_spec, "custom model spec file (overrides --model)");
    mem->add_option("--optimizer", mem_opt, "adam | ldadam | galore");
    mem->add_option("--rank", mem_rank, "projection rank");
    mem->add_option("--bytes", mem_bytes, "bytes per token (2 or 4)");
    mem->add_flag("--verbose", mem_verbose, "print both unit conventions and weights");

    auto* chk = app.add_subcommand("check", "run the property suite");

    auto* dump = app.add_subcommand("dump-data", "write a problem's synthetic dataset as CSV");
    std::string dump_config, dump_out;
    dump->add_option("--config", dump_config, "experiment config file")->required();
    dump->add_option("--out", dump_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_out);
        if (cmp->parsed()) return cmd_compare(cmp_configs, cmp_seeds, cmp_out, cmp_threads);
        if (mem->parsed())
            return cmd_memory(mem_model, mem_spec, mem_opt, mem_rank, mem_bytes, mem_verbose);
        if (chk->parsed()) return ldadam::run_selfcheck(std::cout) ? kExitOk : kExitViolation;
        if (dump->parsed()) return cmd_dump_data(dump_config, dump_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
