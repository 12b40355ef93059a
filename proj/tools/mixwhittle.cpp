#include "CLI11.hpp"

#include "mixwhittle/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    namespace mc = mixwhittle::cli;
    CLI::App app{"Mixed time-series models: fitting, gap filling, forecasting and simulation studies"};
    app.require_subcommand(1);

    std::optional<std::string> config;
    mc::Overrides o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON run configuration");
        sub->add_option("--series", o.series, "response CSV (time,value)");
        sub->add_option("--exog", o.exog, "exogenous driver CSV (time,value)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "base seed");
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--deseasonalise-exog", o.deseasonalise_exog, "subtract per-month means from the driver");
        sub->add_flag("--allow-nonconverged", o.allow_nonconverged, "exit 0 even if an optimizer did not converge");
    };
    const std::map<std::string, std::string> help{
        {"fit", "fit a model and write fit.json"},
        {"fill", "Kriging predictions at missing times (fill.csv)"},
        {"forecast", "Kriging forecasts past the end of the series (forecast.csv)"},
        {"diagnose", "residual autocovariance and Q-Q data"},
        {"simulate", "run a simulation study"},
        {"gap-experiment", "compare two fitted models on artificial gaps"}};
    for (const auto& name : mc::commands()) common(app.add_subcommand(name, help.at(name)));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return mc::run(app.get_subcommands().front()->get_name(), config, o);
}
