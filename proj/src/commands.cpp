// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "posetok/flops.hpp"
#include "posetok/metrics.hpp"
#include "posetok/toy.hpp"

namespace posetok {

using Json = nlohmann::ordered_json;

namespace {

void write_output(const CommandOptions& options, const std::string& name, std::string_view content) {
    std::filesystem::create_directories(options.out_dir);
    atomic_write(options.out_dir / name, content);
}

std::string dump(const Json& json) {
    return json.dump(2) + "\n";
}

Json config_json(const ModelConfig& c) {
    Json j;
    j["frames"] = c.frames;
    j["joints"] = c.joints;
    j["channels"] = c.channels;
    j["blocks"] = c.blocks;
    j["heads"] = c.heads;
    j["tra_heads"] = c.tra_heads;
    j["block"] = c.prune_block;
    j["tokens"] = c.tokens;
    j["recovered"] = c.recovered_frames();
    j["knn"] = c.knn_or_default();
    j["pipeline"] = std::string(to_string(c.pipeline));
    j["strategy"] = std::string(to_string(c.prune_strategy));
    j["recover"] = std::string(to_string(c.recover_strategy));
    return j;
}

void require(const std::filesystem::path& path, const char* flag) {
    if (path.empty()) {
        throw ConfigError(std::string("missing required option ") + flag);
    }
}

HostModel<float> load_model_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open model '" + path.string() + "'");
    }
    return load_model(in);
}

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
    return a.frames == b.frames && a.joints == b.joints && a.channels == b.channels && a.blocks == b.blocks &&
           a.heads == b.heads && a.uses_tra() == b.uses_tra() &&
           (!a.uses_tra() || (a.tra_heads == b.tra_heads && a.recovered_frames() == b.recovered_frames()));
}

/// The model file's configuration with explicit settings applied on top.
HostModel<float> resolve_model(const CommandOptions& options) {
    HostModel<float> stored = load_model_file(options.model);
    RunConfig run;
    run.model = stored.config();
    apply_config(options.overrides, run);
    if (run.model == stored.config()) {
        return stored;
    }
    if (!same_architecture(run.model, stored.config())) {
        throw ConfigError("settings are incompatible with the architecture stored in '" + options.model.string() +
                          "'");
    }
    HostModel<float> model(run.model);
    copy_parameter_values(stored.parameters(), model.parameters());
    return model;
}

void check_record(const PoseSequence& pose, const ModelConfig& config, std::size_t index) {
    if (pose.frames() != config.frames || pose.joints() != config.joints || pose.dims() != 2) {
        throw DataError("record " + std::to_string(index + 1) + " is " + std::to_string(pose.frames()) + "x" +
                        std::to_string(pose.joints()) + "x" + std::to_string(pose.dims()) + ", model expects " +
                        std::to_string(config.frames) + "x" + std::to_string(config.joints) + "x2");
    }
}

IndexList identity(std::size_t frames) {
    IndexList out(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        out[t] = t;
    }
    return out;
}

}  // namespace

void cmd_prune(const CommandOptions& options, std::ostream& log) {
    require(options.input, "--input");
    const auto records = read_pose_file(options.input);
    if (records.empty()) {
        throw DataError("'" + options.input.string() + "' contains no pose records");
    }
    std::optional<HostModel<float>> model;
    if (!options.model.empty()) {
        model.emplace(resolve_model(options));
    }
    const ModelConfig base = model ? model->config() : options.run.model;

    Json runs = Json::array();
    std::vector<IndexList> selections;
    std::size_t frames = records.front().frames();
    for (std::size_t r = 0; r < records.size(); ++r) {
        const PoseSequence& pose = records[r];
        if (pose.frames() != frames) {
            throw DataError("record " + std::to_string(r + 1) + " has " + std::to_string(pose.frames()) +
                            " frames, expected " + std::to_string(frames));
        }
        ModelConfig cfg = base;
        if (!model) {
            cfg.frames = pose.frames();
            cfg.joints = pose.joints();
        }
        PruneConfig prune = cfg.prune_config();
        prune.validate(cfg.frames, cfg.blocks);

        Json run = Json::object();
        IndexList selected;
        switch (prune.strategy) {
        case PruneStrategy::tpc: {
            Tensor tokens = pose.tensor();
            if (model) {
                check_record(pose, cfg, r);
                tokens = model->hidden_tokens(pose, prune.block);
            }
            if (prune.tokens == cfg.frames && cfg.frames == 1) {
                selected = identity(1);
                break;
            }
            ClusterResult clusters = select_tpc(tokens, prune).second;
            selected = clusters.selected_indexes;
            run["density"] = clusters.density;
            run["delta"] = clusters.delta;
            run["score"] = clusters.score;
            run["cluster_label"] = clusters.cluster_label;
            break;
        }
        case PruneStrategy::uniform:
            selected = select_uniform(cfg.frames, prune.tokens);
            break;
        case PruneStrategy::attention: {
            if (pose.dims() != 2) {
                throw DataError("attention pruning needs 2D input");
            }
            std::vector<double> scores;
            if (model) {
                check_record(pose, cfg, r);
                scores = temporal_attention_scores(*model, pose, prune.block);
            } else {
                HostModel<float> fresh(cfg);
                fresh.init(options.run.seed);
                scores = temporal_attention_scores(fresh, pose, prune.block);
            }
            selected = select_by_attention(cfg.frames, scores, prune.tokens);
            run["attention"] = scores;
            break;
        }
        case PruneStrategy::motion: {
            auto motion = frame_motion(pose);
            selected = select_by_motion(pose, prune.tokens);
            run["motion"] = motion;
            break;
        }
        }
        Json entry;
        entry["selected"] = selected;
        entry.update(run);
        runs.push_back(std::move(entry));
        selections.push_back(std::move(selected));
    }

    const SelectionStats stats = selection_stats(selections, frames);
    Json out;
    out["strategy"] = std::string(to_string(base.prune_strategy));
    out["frames"] = frames;
    out["tokens"] = base.tokens;
    out["knn"] = base.knn == 0 ? default_knn(frames) : base.knn;
    out["block"] = base.prune_block;
    out["seed"] = options.run.seed;
    out["runs"] = std::move(runs);
    out["histogram"] = stats.histogram;

    std::ostringstream selection_text, histogram, matrix;
    write_selections(selection_text, selections);
    histogram << "frame,count\n";
    for (std::size_t t = 0; t < frames; ++t) {
        histogram << t << ',' << stats.histogram[t] << '\n';
    }
    for (const auto& row : stats.matrix) {
        for (std::size_t t = 0; t < row.size(); ++t) {
            matrix << static_cast<int>(row[t]);
        }
        matrix << '\n';
    }
    write_output(options, "selection.txt", selection_text.str());
    write_output(options, "prune.json", dump(out));
    write_output(options, "histogram.csv", histogram.str());
    write_output(options, "selection_matrix.txt", matrix.str());
    log << "pruned " << selections.size() << " record(s) with " << to_string(base.prune_strategy) << ": kept "
        << base.tokens << " of " << frames << " frames\n";
}

void cmd_infer(const CommandOptions& options, std::ostream& log) {
    require(options.input, "--input");
    require(options.model, "--model");
    const HostModel<float> model = resolve_model(options);
    const ModelConfig& cfg = model.config();
    const auto records = read_pose_file(options.input);

    std::vector<PoseSequence> outputs;
    std::vector<IndexList> selections;
    for (std::size_t r = 0; r < records.size(); ++r) {
        check_record(records[r], cfg, r);
        if (options.baseline) {
            outputs.push_back(forward_unpruned(records[r], model));
            continue;
        }
        ForwardCache<float> cache;
        outputs.emplace_back(model.forward(records[r], &cache));
        selections.push_back(cache.selected);
    }
    for (const auto& pose : outputs) {
        for (float v : pose.tensor().data()) {
            if (!std::isfinite(v)) {
                throw NumericalError("model produced a non-finite output");
            }
        }
    }
    std::ostringstream pred;
    write_poses(pred, outputs);
    write_output(options, "pred.txt", pred.str());
    if (!options.baseline) {
        std::ostringstream sel;
        write_selections(sel, selections);
        write_output(options, "selection.txt", sel.str());
    }
    log << "inferred " << outputs.size() << " record(s), " << to_string(cfg.pipeline)
        << (options.baseline ? " without pruning" : "") << "\n";
}

void cmd_flops(const CommandOptions& options, std::ostream& log) {
    const ModelConfig& cfg = options.run.model;
    const FlopsReport base = model_flops(cfg, false);
    const FlopsReport pruned = model_flops(cfg, true);

    std::ostringstream table;
    table << "config F=" << cfg.frames << " J=" << cfg.joints << " C=" << cfg.channels << " L=" << cfg.blocks
          << " n=" << cfg.prune_block << " f=" << cfg.tokens << " pipeline=" << to_string(cfg.pipeline)
          << " strategy=" << to_string(cfg.prune_strategy) << " recover=" << to_string(cfg.recover_strategy)
          << "\n";
    table << std::left << std::setw(12) << "stage" << std::right << std::setw(8) << "frames" << std::setw(18)
          << "baseline" << std::setw(8) << "frames" << std::setw(18) << "pruned" << "\n";
    auto row = [&](const std::string& name, std::size_t bf, std::uint64_t bv, std::size_t pf, std::uint64_t pv) {
        table << std::left << std::setw(12) << name << std::right << std::setw(8) << bf << std::setw(18) << bv
              << std::setw(8) << pf << std::setw(18) << pv << "\n";
    };
    const std::size_t head_frames = cfg.pipeline == Pipeline::seq2seq ? cfg.frames : 1;
    row("embed", cfg.frames, base.embed, cfg.frames, pruned.embed);
    Json blocks = Json::array();
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        row("block " + std::to_string(b + 1), base.blocks[b].frames, base.blocks[b].total(), pruned.blocks[b].frames,
            pruned.blocks[b].total());
        Json jb;
        jb["frames"] = pruned.blocks[b].frames;
        jb["spatial_attention"] = pruned.blocks[b].spatial_attention;
        jb["temporal_attention"] = pruned.blocks[b].temporal_attention;
        jb["ffn"] = pruned.blocks[b].ffn;
        jb["baseline_total"] = base.blocks[b].total();
        jb["total"] = pruned.blocks[b].total();
        blocks.push_back(std::move(jb));
    }
    row("recovery", 0, base.tra, pruned.tra > 0 ? cfg.recovered_frames() : 0, pruned.tra);
    row("head", head_frames, base.head, pruned.tra > 0 ? cfg.recovered_frames() : head_frames, pruned.head);
    row("total", cfg.frames, base.total, cfg.frames, pruned.total);
    table << "reduction_ratio " << format_number(pruned.reduction_ratio) << "\n";
    table << "params_host " << pruned.params.host << "\n";
    table << "params_recovery " << pruned.params.tra << "\n";

    Json out;
    out["config"] = config_json(cfg);
    out["baseline_total"] = pruned.baseline_total;
    out["pruned_total"] = pruned.total;
    out["reduction_ratio"] = pruned.reduction_ratio;
    out["embed"] = pruned.embed;
    out["head"] = pruned.head;
    out["recovery"] = pruned.tra;
    out["blocks"] = std::move(blocks);
    out["params_host"] = pruned.params.host;
    out["params_recovery"] = pruned.params.tra;
    write_output(options, "flops.txt", table.str());
    write_output(options, "flops.json", dump(out));
    log << table.str();

    if (options.sweep_blocks.empty() && options.sweep_tokens.empty()) {
        return;
    }
    std::vector<std::size_t> blocks_values = options.sweep_blocks, token_values = options.sweep_tokens;
    if (blocks_values.empty()) {
        blocks_values.push_back(cfg.prune_block);
    }
    if (token_values.empty()) {
        token_values.push_back(cfg.tokens);
    }
    const SweepTable sweep = sweep_reduction(cfg, blocks_values, token_values);
    std::ostringstream text;
    text << "n\\f";
    for (std::size_t f : sweep.token_values) {
        text << ' ' << std::setw(12) << f;
    }
    text << "\n";
    Json grid = Json::array();
    for (std::size_t i = 0; i < sweep.block_values.size(); ++i) {
        text << std::setw(3) << sweep.block_values[i];
        for (std::size_t k = 0; k < sweep.token_values.size(); ++k) {
            text << ' ' << std::setw(12) << format_number(sweep.ratios[i][k]);
            Json cell;
            cell["block"] = sweep.block_values[i];
            cell["tokens"] = sweep.token_values[k];
            cell["reduction_ratio"] = sweep.ratios[i][k];
            grid.push_back(std::move(cell));
        }
        text << "\n";
    }
    Json sweep_json;
    sweep_json["config"] = config_json(cfg);
    sweep_json["grid"] = std::move(grid);
    write_output(options, "sweep.txt", text.str());
    write_output(options, "sweep.json", dump(sweep_json));
    log << text.str();
}

void cmd_eval(const CommandOptions& options, std::ostream& log) {
    require(options.pred, "--pred");
    require(options.gt, "--gt");
    const auto preds = read_pose_file(options.pred);
    const auto gts = read_pose_file(options.gt);
    if (preds.size() != gts.size() || preds.empty()) {
        throw DataError("prediction and ground truth hold " + std::to_string(preds.size()) + " and " +
                        std::to_string(gts.size()) + " records");
    }
    std::vector<IndexList> selections;
    if (!options.selection.empty()) {
        selections = read_selection_file(options.selection);
        if (selections.size() != preds.size()) {
            throw DataError("selection file holds " + std::to_string(selections.size()) + " lines for " +
                            std::to_string(preds.size()) + " records");
        }
    }
    std::vector<PoseSequence> detected, truth2d;
    const bool noise = !options.detected2d.empty() && !options.gt2d.empty();
    if (noise) {
        detected = read_pose_file(options.detected2d);
        truth2d = read_pose_file(options.gt2d);
        if (detected.size() != preds.size() || truth2d.size() != preds.size()) {
            throw DataError("2D pose files must hold one record per prediction");
        }
    }

    auto opt_json = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json records = Json::array();
    std::ostringstream text;
    text << "record mpjpe_full mpjpe_pruned mpjpe_selected mpjpe_center gap pck auc frame_noise\n";
    auto opt_text = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("-"); };
    double sum_full = 0.0, sum_pck = 0.0, sum_auc = 0.0;
    for (std::size_t r = 0; r < preds.size(); ++r) {
        std::optional<std::span<const std::size_t>> sel;
        if (!selections.empty()) {
            sel = std::span<const std::size_t>(selections[r]);
        }
        const EvalReport rep = evaluate(preds[r], gts[r], sel, noise ? &detected[r] : nullptr,
                                        noise ? &truth2d[r] : nullptr);
        Json j;
        j["mpjpe_full"] = rep.mpjpe_full;
        j["mpjpe_pruned"] = opt_json(rep.mpjpe_pruned);
        j["mpjpe_selected"] = opt_json(rep.mpjpe_selected);
        j["mpjpe_center"] = rep.mpjpe_center;
        j["gap"] = opt_json(rep.gap);
        j["pck"] = rep.pck;
        j["auc"] = rep.auc;
        j["frame_noise"] = opt_json(rep.frame_noise);
        records.push_back(std::move(j));
        text << r << ' ' << format_number(rep.mpjpe_full) << ' ' << opt_text(rep.mpjpe_pruned) << ' '
             << opt_text(rep.mpjpe_selected) << ' ' << format_number(rep.mpjpe_center) << ' ' << opt_text(rep.gap)
             << ' ' << format_number(rep.pck) << ' ' << format_number(rep.auc) << ' ' << opt_text(rep.frame_noise)
             << "\n";
        sum_full += rep.mpjpe_full;
        sum_pck += rep.pck;
        sum_auc += rep.auc;
    }
    const double n = static_cast<double>(preds.size());
    Json out;
    out["records"] = std::move(records);
    out["mean_mpjpe_full"] = sum_full / n;
    out["mean_pck"] = sum_pck / n;
    out["mean_auc"] = sum_auc / n;
    write_output(options, "eval.txt", text.str());
    write_output(options, "eval.json", dump(out));
    log << text.str();
}

void cmd_train_toy(const CommandOptions& options, std::ostream& log) {
    const RunConfig& run = options.run;
    TrainResult result = train_toy(run);

    std::ostringstream model_bytes(std::ios::binary);
    save_model(result.model, model_bytes);
    std::ostringstream curve;
    curve << "step,loss\n";
    for (std::size_t s = 0; s < result.losses.size(); ++s) {
        curve << s << ',' << format_number(result.losses[s]) << '\n';
    }
    Json out;
    out["config"] = config_json(run.model);
    out["seed"] = run.seed;
    out["steps"] = run.train.steps;
    out["learning_rate"] = run.train.learning_rate;
    out["batch"] = run.train.batch;
    out["samples"] = run.train.samples;
    out["initial_mpjpe"] = result.initial_mpjpe;
    out["final_mpjpe"] = result.final_mpjpe;
    out["final_over_initial"] = result.final_mpjpe / result.initial_mpjpe;
    write_output(options, "model.bin", model_bytes.str());
    write_output(options, "loss_curve.csv", curve.str());
    write_output(options, "train.json", dump(out));
    log << "trained " << run.train.steps << " steps: mpjpe " << format_number(result.initial_mpjpe) << " -> "
        << format_number(result.final_mpjpe) << "\n";
}

int run_guarded(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace posetok
