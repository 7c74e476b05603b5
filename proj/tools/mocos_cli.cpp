#include "mocos/errors.hpp"
#include "mocos/optim.hpp"
#include "mocos/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using namespace mocos;

struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        for (const std::string& key : config_keys())
            cmd->add_option("--" + key, values[key], "config key " + key);
    }

    RunConfig resolve() const {
        RunConfig base;
        if (!config_path.empty()) base = load_config(config_path);
        std::map<std::string, std::string> given;
        for (const auto& [k, v] : values)
            if (!v.empty()) given[k] = v;
        return apply_overrides(base, given);
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Motif-guided skeleton re-identification"};
    app.require_subcommand(1);

    // gen
    GenOptions gen;
    std::string gen_difficulty = "easy", gen_out;
    std::optional<double> gen_noise;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic gait dataset");
    gen_cmd->add_option("--ids", gen.identities, "number of identities")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seqs", gen.seqs_per_id, "sequences per identity")->check(CLI::Range(3, 1000000));
    gen_cmd->add_option("--frames", gen.frames, "frames per sequence")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--difficulty", gen_difficulty, "easy or hard");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--layout", gen.layout, "built-in joint layout");
    gen_cmd->add_option("--noise", gen_noise, "per-coordinate noise sigma");
    gen_cmd->add_option("--out", gen_out, "output SKL1 file")->required();

    // train
    ConfigFlags train_flags;
    std::string train_data, train_out;
    auto* train_cmd = app.add_subcommand("train", "Train an encoder and write a checkpoint");
    train_flags.attach(train_cmd);
    train_cmd->add_option("--data", train_data, "SKL1 dataset")->required();
    train_cmd->add_option("--out", train_out, "checkpoint path")->required();

    // eval
    std::string eval_ckpt, eval_data, eval_ap, eval_metric;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's probe and gallery");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "SKL1 dataset")->required();
    eval_cmd->add_option("--metric", eval_metric, "cosine or euclidean (default: checkpoint config)");
    eval_cmd->add_option("--ap-csv", eval_ap, "write per-probe average precision here");

    // inspect-motifs
    ConfigFlags inspect_flags;
    std::string inspect_data;
    auto* inspect_cmd = app.add_subcommand("inspect-motifs", "Print motif matrices and the head table");
    inspect_flags.attach(inspect_cmd);
    inspect_cmd->add_option("--data", inspect_data, "take the layout and limb sets from this dataset");

    // dump-relations
    std::string dump_ckpt, dump_data, dump_out;
    auto* dump_cmd = app.add_subcommand("dump-relations", "Write mean relation matrices per layer and head as CSV");
    dump_cmd->add_option("--checkpoint", dump_ckpt, "checkpoint path")->required();
    dump_cmd->add_option("--data", dump_data, "SKL1 dataset")->required();
    dump_cmd->add_option("--out", dump_out, "CSV path (default: stdout)");

    // check-grad
    std::uint64_t grad_seed = 7;
    auto* grad_cmd = app.add_subcommand("check-grad", "Run the gradient-check suite");
    grad_cmd->add_option("--seed", grad_seed, "seed for the random inputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*gen_cmd) {
        gen.difficulty = parse_difficulty(gen_difficulty);
        gen.noise_sigma = gen_noise;
        write_dataset(generate_dataset(gen), gen_out);
        return 0;
    }
    if (*train_cmd) {
        const RunConfig config = train_flags.resolve();
        const Dataset data = read_dataset(train_data);
        const TrainResult result = train_model(config, data, [](const EpochStats& s) {
            std::printf("epoch=%d loss=%.6f str=%.6f ssk=%.6f secs=%.3f\n", s.epoch, s.loss, s.str, s.ssk, s.secs);
            std::fflush(stdout);
        });
        write_checkpoint(result.model, train_out);
        return 0;
    }
    if (*eval_cmd) {
        Model model = read_checkpoint(eval_ckpt);
        if (!eval_metric.empty()) model.config.metric = parse_metric(eval_metric);
        const Dataset data = read_dataset(eval_data);
        const EvalReport report = evaluate_model(model, data);
        std::printf("%s\n", report.summary().c_str());
        if (!eval_ap.empty()) {
            std::ofstream out = open_out(eval_ap);
            write_ap_csv(report, data, out);
        }
        return 0;
    }
    if (*inspect_cmd) {
        RunConfig config = inspect_flags.resolve();
        JointLayout layout;
        std::optional<LimbSets> file_limbs;
        if (!inspect_data.empty()) {
            const Dataset data = read_dataset(inspect_data);
            layout = data.layout;
            file_limbs = data.limbs;
        } else {
            const auto builtin = builtin_layout(config.layout);
            if (!builtin) throw ValidationError("inspect-motifs: layout '" + config.layout + "' needs --data");
            layout = *builtin;
        }
        const LimbSets limbs = !config.limbs_upper.empty() ? LimbSets{config.limbs_upper, config.limbs_lower}
                               : file_limbs                ? *file_limbs
                                                           : default_limb_sets(layout.name);
        inspect_motifs(config, layout, limbs, std::cout);
        return 0;
    }
    if (*dump_cmd) {
        const Model model = read_checkpoint(dump_ckpt);
        const Dataset data = read_dataset(dump_data);
        if (data.layout.joints != model.layout.joints)
            throw ValidationError("dataset has J=" + std::to_string(data.layout.joints) + ", checkpoint expects J=" +
                                  std::to_string(model.layout.joints));
        std::vector<SkeletonSequence> all = data.split.train;
        all.insert(all.end(), data.split.probe.begin(), data.split.probe.end());
        all.insert(all.end(), data.split.gallery.begin(), data.split.gallery.end());
        const RelationStack relations = model.encoder.mean_relations(clip_frames(all, model.config.f));
        if (dump_out.empty()) {
            write_relations_csv(relations, std::cout);
        } else {
            std::ofstream out = open_out(dump_out);
            write_relations_csv(relations, out);
        }
        return 0;
    }
    if (*grad_cmd) {
        bool ok = true;
        for (const auto& r : ad::run_gradient_suite(grad_seed)) {
            std::printf("%-24s max_rel_error=%.3e tol=%.0e %s\n", r.name.c_str(), r.max_rel_error, r.tolerance,
                        r.passed() ? "ok" : "FAIL");
            ok = ok && r.passed();
        }
        return ok ? 0 : 2;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mocos::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 2;
    } catch (const mocos::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
