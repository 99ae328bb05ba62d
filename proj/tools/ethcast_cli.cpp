#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ethcast/ethcast.h"

namespace {

struct Context {
    ethcast_context* ctx = nullptr;
    Context() {
        if (ethcast_context_create(&ctx) != ETHCAST_OK) throw std::runtime_error("cannot create context");
    }
    ~Context() { ethcast_context_destroy(ctx); }
    Context(const Context&) = delete;
    Context& operator=(const Context&) = delete;
};

void print_line(const char* line, void* quiet) {
    if (!*static_cast<bool*>(quiet)) std::fprintf(stderr, "%s\n", line);
}

int report(ethcast_context* ctx, ethcast_status status) {
    std::fprintf(stderr, "error: %s\n", ethcast_last_error(ctx));
    return ethcast_exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Daily ETH price forecasting with frozen pretrained transformer backbones and baselines"};
    app.set_version_flag("--version", std::string(ethcast_version()));

    std::string command;
    std::string config;
    std::string seed;
    std::string dataset;
    std::string model;
    std::string protocol;
    std::string out;
    std::string registry;
    std::string checkpoint;
    std::vector<std::string> sets;
    bool quiet = false;
    bool list_keys = false;

    app.add_option("command", command, "prepare | train | evaluate | fewshot | compare | export-plot-data");
    app.add_option("--config", config, "config file (sectioned key = value)");
    app.add_option("--seed", seed, "random seed (train.seed)");
    app.add_option("--dataset", dataset, "price CSV (data.path)");
    app.add_option("--model", model, "gpt2 | llama | ann | mlp | lstm | patchtst (model.kind)");
    app.add_option("--protocol", protocol, "short_term | few_shot (train.protocol)");
    app.add_option("--out", out, "artifact directory (output.dir)");
    app.add_option("--registry", registry, "registry file (output.registry)");
    app.add_option("--checkpoint", checkpoint, "checkpoint for evaluate / export-plot-data (output.checkpoint)");
    app.add_option("--set", sets, "override any config key: section.key=value")->take_all();
    app.add_flag("-q,--quiet", quiet, "suppress progress lines");
    app.add_flag("--list-keys", list_keys, "print every config key and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (list_keys) {
        for (std::size_t i = 0; i < ethcast_config_key_count(); ++i) {
            const char* name = nullptr;
            const char* help = nullptr;
            ethcast_config_key(i, &name, &help);
            std::printf("%-26s %s\n", name, help);
        }
        return 0;
    }
    if (command.empty()) {
        std::fprintf(stderr, "error: a command is required\n%s", app.help().c_str());
        return 2;
    }

    Context holder;
    ethcast_context* ctx = holder.ctx;
    ethcast_set_log_callback(ctx, print_line, &quiet);

    if (!config.empty()) {
        if (const auto st = ethcast_set_config(ctx, config.c_str()); st != ETHCAST_OK) return report(ctx, st);
    }
    const std::pair<const char*, const std::string*> flags[] = {
        {"model.kind", &model},       {"train.seed", &seed},       {"data.path", &dataset},
        {"train.protocol", &protocol}, {"output.dir", &out},        {"output.registry", &registry},
        {"output.checkpoint", &checkpoint},
    };
    for (const auto& [key, value] : flags) {
        if (value->empty()) continue;
        if (const auto st = ethcast_set_option(ctx, key, value->c_str()); st != ETHCAST_OK) return report(ctx, st);
    }
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects section.key=value, got \"%s\"\n", kv.c_str());
            return 2;
        }
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (const auto st = ethcast_set_option(ctx, key.c_str(), value.c_str()); st != ETHCAST_OK) {
            return report(ctx, st);
        }
    }

    const ethcast_status st = ethcast_run_command(ctx, command.c_str());
    if (st != ETHCAST_OK) return report(ctx, st);
    std::fputs(ethcast_last_output(ctx), stdout);
    return 0;
}
