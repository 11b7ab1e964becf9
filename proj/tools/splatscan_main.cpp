// splatscan CLI: scene-gen | fit | active-run | ablate | eval | render.
#include <CLI11.hpp>
#include <iostream>

#include "splatscan/cli.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string policy;
    std::string resolution;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--seed", f.seed, "root seed (overrides config)");
    cmd->add_option("--out", f.out_dir, "output directory (overrides config)");
    cmd->add_option("--policy", f.policy, "random | oracle_ssim | uq (overrides config)");
    cmd->add_option("--resolution", f.resolution, "WxH (overrides config)");
}

splatscan::RunConfig resolve(const CommonFlags& f) {
    splatscan::RunConfig cfg = f.config_path.empty()
                                   ? splatscan::default_run_config()
                                   : splatscan::load_run_config(f.config_path);
    if (f.seed >= 0) cfg.seed = uint64_t(f.seed);
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (!f.policy.empty()) cfg.policy = f.policy;
    if (!f.resolution.empty()) {
        auto x = f.resolution.find('x');
        if (x == std::string::npos)
            throw std::runtime_error("--resolution expects WxH, got '" + f.resolution + "'");
        cfg.width = std::stoi(f.resolution.substr(0, x));
        cfg.height = std::stoi(f.resolution.substr(x + 1));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active 3D Gaussian splatting scan planner"};
    app.require_subcommand(1);

    CommonFlags scene_gen_f, fit_f, active_f, ablate_f, render_f;
    std::string eval_dir;

    add_common(app.add_subcommand("scene-gen", "generate a synthetic ground-truth scene"),
               scene_gen_f);
    add_common(app.add_subcommand("fit", "fit with a fixed (non-active) view budget"), fit_f);
    add_common(app.add_subcommand("active-run", "run the active reconstruction loop"), active_f);
    add_common(app.add_subcommand("ablate", "run the scoring ablation grid"), ablate_f);
    add_common(app.add_subcommand("render", "render the ground-truth scene"), render_f);
    app.add_subcommand("eval", "replay metrics from a finished run directory")
        ->add_option("run_dir", eval_dir, "run output directory")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("scene-gen")) splatscan::cmd_scene_gen(resolve(scene_gen_f));
        if (app.got_subcommand("fit")) splatscan::cmd_fit(resolve(fit_f));
        if (app.got_subcommand("active-run")) splatscan::cmd_active_run(resolve(active_f));
        if (app.got_subcommand("ablate")) splatscan::cmd_ablate(resolve(ablate_f));
        if (app.got_subcommand("render")) splatscan::cmd_render(resolve(render_f));
        if (app.got_subcommand("eval")) splatscan::cmd_eval(eval_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
