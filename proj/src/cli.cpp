#include "microhmc/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "microhmc/diagnose.hpp"

namespace microhmc::cli {

std::string usage() {
    return "usage: microhmc <model> [dim=N] sample [num_samples=N] [num_warmup=N] [chains=N] [max_depth=N]\n"
           "                [adapt [delta=X] [metric=unit|diag]] [data file=PATH] [metric file=PATH]\n"
           "                [random seed=N] [output dir=PATH [report=0|1]] [threads=N] [strict]\n"
           "\n"
           "models: gauss, cauchy (dim=N, default 100), eight_schools_cp, eight_schools_ncp (need data file=PATH)\n"
           "defaults: num_samples=10000 num_warmup=1000 chains=4 max_depth=10 delta=0.8 metric=diag seed=0\n"
           "exit codes: 0 ok, 1 adaptation failure, 2 usage or input error, 3 output error,\n"
           "            4 report flagged UNRELIABLE under strict\n";
}

namespace {

template <typename T>
T parse_number(const std::string& token, const std::string& value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
        throw UsageError(fmt::format("malformed value in '{}'", token));
    }
    return out;
}

std::size_t parse_count(const std::string& token, const std::string& value, std::size_t min) {
    const auto v = parse_number<std::uint64_t>(token, value);
    if (v < min) {
        throw UsageError(fmt::format("'{}': value must be at least {}", token, min));
    }
    return static_cast<std::size_t>(v);
}

bool parse_flag(const std::string& token, const std::string& value) {
    if (value == "1" || value == "true") {
        return true;
    }
    if (value == "0" || value == "false") {
        return false;
    }
    throw UsageError(fmt::format("'{}': expected 0 or 1", token));
}

enum class Group { top, sample, adapt, data, random, output, metric };

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
    if (args.empty()) {
        throw UsageError("missing model name");
    }
    RunConfig cfg;
    cfg.sampler.num_samples = 10000;
    cfg.sampler.num_warmup = 1000;
    cfg.sampler.chains = 4;
    cfg.sampler.target_accept = 0.8;

    static const std::map<std::string, ModelKind> models = {
        {"gauss", ModelKind::gauss},
        {"cauchy", ModelKind::cauchy},
        {"eight_schools_cp", ModelKind::eight_schools_cp},
        {"eight_schools_ncp", ModelKind::eight_schools_ncp},
    };
    const auto model_it = models.find(args[0]);
    if (model_it == models.end()) {
        throw UsageError(fmt::format("unknown model '{}'", args[0]));
    }
    cfg.model = model_it->second;

    Group group = Group::top;
    bool saw_sample = false;

    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& token = args[i];
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            if (token == "sample") {
                saw_sample = true;
                group = Group::sample;
            } else if (token == "adapt") {
                group = Group::adapt;
            } else if (token == "data") {
                group = Group::data;
            } else if (token == "random") {
                group = Group::random;
            } else if (token == "output") {
                group = Group::output;
            } else if (token == "metric") {
                group = Group::metric;
            } else if (token == "strict") {
                cfg.strict = true;
            } else {
                throw UsageError(fmt::format("unknown argument '{}'", token));
            }
            continue;
        }
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key.empty()) {
            throw UsageError(fmt::format("malformed argument '{}'", token));
        }

        // Group-scoped keys first, then keys valid anywhere.
        if (group == Group::adapt && key == "delta") {
            const double delta = parse_number<double>(token, value);
            if (!(delta > 0.0 && delta < 1.0)) {
                throw UsageError(fmt::format("'{}': delta must lie strictly between 0 and 1", token));
            }
            cfg.sampler.target_accept = delta;
        } else if (group == Group::adapt && key == "metric") {
            if (value == "unit") {
                cfg.sampler.metric_mode = MetricMode::unit;
            } else if (value == "diag") {
                cfg.sampler.metric_mode = MetricMode::diagonal_adapt;
            } else {
                throw UsageError(fmt::format("'{}': metric must be unit or diag", token));
            }
        } else if (group == Group::data && key == "file") {
            if (value.empty()) {
                throw UsageError(fmt::format("malformed argument '{}'", token));
            }
            cfg.data_file = value;
        } else if (group == Group::metric && key == "file") {
            if (value.empty()) {
                throw UsageError(fmt::format("malformed argument '{}'", token));
            }
            cfg.metric_file = value;
        } else if (group == Group::random && key == "seed") {
            cfg.sampler.seed = parse_number<std::uint64_t>(token, value);
        } else if (group == Group::output && key == "dir") {
            if (value.empty()) {
                throw UsageError(fmt::format("malformed argument '{}'", token));
            }
            cfg.output_dir = value;
        } else if (group == Group::output && key == "report") {
            cfg.report = parse_flag(token, value);
        } else if (saw_sample && key == "num_samples") {
            cfg.sampler.num_samples = parse_count(token, value, 1);
        } else if (saw_sample && key == "num_warmup") {
            cfg.sampler.num_warmup = parse_count(token, value, 0);
        } else if (saw_sample && key == "chains") {
            cfg.sampler.chains = parse_count(token, value, 1);
        } else if (saw_sample && key == "max_depth") {
            const auto depth = parse_count(token, value, 1);
            if (depth > 30) {
                throw UsageError(fmt::format("'{}': max_depth must be at most 30", token));
            }
            cfg.sampler.max_tree_depth = static_cast<int>(depth);
        } else if (key == "dim") {
            cfg.dim = parse_count(token, value, 1);
        } else if (key == "threads") {
            cfg.sampler.threads = parse_count(token, value, 1);
        } else {
            throw UsageError(fmt::format("unknown argument '{}'", token));
        }
    }

    if (!saw_sample) {
        throw UsageError("missing 'sample' method");
    }
    const bool schools = cfg.model == ModelKind::eight_schools_cp || cfg.model == ModelKind::eight_schools_ncp;
    if (schools && !cfg.data_file) {
        throw UsageError(fmt::format("model '{}' needs 'data file=PATH'", args[0]));
    }
    return cfg;
}

std::vector<std::string> trace_columns(const std::vector<std::string>& parameter_names) {
    std::vector<std::string> cols = {"iteration",  "energy__",      "delta_energy__", "resample_delta_k__",
                                     "divergent__", "treedepth__",  "stepsize__",     "accept_stat__",
                                     "n_leapfrog__"};
    cols.insert(cols.end(), parameter_names.begin(), parameter_names.end());
    return cols;
}

std::string format_trace_csv(const ChainTrace& trace, const std::vector<std::string>& parameter_names) {
    std::string out;
    const auto cols = trace_columns(parameter_names);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out += cols[c];
        out += c + 1 < cols.size() ? ',' : '\n';
    }
    auto buf = std::back_inserter(out);
    for (std::size_t n = 0; n < trace.infos.size(); ++n) {
        const auto& info = trace.infos[n];
        fmt::format_to(buf, "{},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{}", n + 1, info.energy,
                       info.delta_energy, info.resample_delta_k, info.divergent ? 1 : 0, info.tree_depth,
                       info.step_size, info.accept_stat, info.n_leapfrog);
        const auto row = trace.draws.row(static_cast<Eigen::Index>(n));
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            fmt::format_to(buf, ",{:.17g}", row[j]);
        }
        out += '\n';
    }
    return out;
}

void emit_trace_csv(const ChainTrace& trace, const std::vector<std::string>& parameter_names,
                    const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
    file << format_trace_csv(trace, parameter_names);
    file.flush();
    if (!file) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
}

ParsedTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw std::runtime_error(fmt::format("cannot read '{}'", path.string()));
    }
    ParsedTrace out;
    std::string line;
    if (!std::getline(file, line)) {
        throw std::runtime_error(fmt::format("'{}' is empty", path.string()));
    }
    std::stringstream header(line);
    for (std::string col; std::getline(header, col, ',');) {
        out.header.push_back(col);
    }
    while (std::getline(file, line)) {
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t end = line.find(',', pos);
            if (end == std::string::npos) {
                end = line.size();
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + end, v);
            if (ec != std::errc{} || ptr != line.data() + end) {
                throw std::runtime_error(fmt::format("'{}': malformed field in row {}", path.string(),
                                                     out.rows.size() + 1));
            }
            row.push_back(v);
            pos = end + 1;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
    file << text;
    file.flush();
    if (!file) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    }
}

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace

int run_command(const RunConfig& cfg, std::ostream& log) {
    ModelPtr model;
    SamplerConfig sampler = cfg.sampler;
    try {
        switch (cfg.model) {
        case ModelKind::gauss:
            model = make_model(spec::GaussianIid{cfg.dim});
            break;
        case ModelKind::cauchy:
            model = make_model(spec::CauchyIid{cfg.dim});
            break;
        case ModelKind::eight_schools_cp:
            model = make_model(spec::EightSchoolsCentered{load_eight_schools(*cfg.data_file)});
            break;
        case ModelKind::eight_schools_ncp:
            model = make_model(spec::EightSchoolsNoncentered{load_eight_schools(*cfg.data_file)});
            break;
        }
        if (cfg.metric_file) {
            std::ifstream in(*cfg.metric_file);
            if (!in) {
                throw ValidationError(fmt::format("cannot open metric file '{}'", cfg.metric_file->string()));
            }
            std::ostringstream text;
            text << in.rdbuf();
            sampler.metric = parse_metric(text.str());
            if (sampler.metric->dim() != model->dim()) {
                throw ValidationError(fmt::format("metric file '{}' has {} entries, model needs {}",
                                                  cfg.metric_file->string(), sampler.metric->dim(), model->dim()));
            }
        }
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    if (const char* env = std::getenv("MICROHMC_THREADS")) {
        std::size_t threads = 0;
        const std::string_view sv(env);
        const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), threads);
        if (ec == std::errc{} && ptr == sv.data() + sv.size() && threads > 0) {
            sampler.threads = threads;
        } else {
            log << "warning: ignoring malformed MICROHMC_THREADS='" << sv << "'\n";
        }
    }

    std::vector<ChainTrace> traces;
    try {
        traces = run_chains(*model, sampler);
    } catch (const ChainError& e) {
        log << "error: " << e.what() << '\n';
        return kExitAdaptation;
    }

    const auto& names = model->parameter_names();
    try {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        if (ec) {
            throw OutputError(fmt::format("cannot create output directory '{}': {}", cfg.output_dir.string(),
                                          ec.message()));
        }
        for (const auto& trace : traces) {
            const auto k = trace.chain_id + 1;
            emit_trace_csv(trace, names, cfg.output_dir / fmt::format("chain_{}.csv", k));
            write_text(cfg.output_dir / fmt::format("metric_{}.txt", k),
                       format_metric(EuclideanMetric::from_inverse_diagonal(trace.inverse_metric)));
        }
    } catch (const std::runtime_error& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    }

    if (!cfg.report) {
        return kExitOk;
    }

    const auto report = build_report(traces, *model, sampler);
    try {
        write_text(cfg.output_dir / "report.txt", render_report(report));
        write_text(cfg.output_dir / "energy_histogram.tsv", render_overlay_tsv(report.energy_overlay));
        write_text(cfg.output_dir / "delta_energy_histogram.tsv", render_overlay_tsv(report.delta_energy_overlay));
    } catch (const std::runtime_error& e) {
        log << "error: " << e.what() << '\n';
        return kExitIo;
    }

    log << fmt::format("{}: BFMI {}, divergences {} ({:.3f}%){}\n", report.model_name,
                       report.pooled_bfmi ? fmt::format("{:.3f}", *report.pooled_bfmi) : "undefined",
                       report.divergences, 100.0 * report.divergence_rate, report.unreliable ? ", UNRELIABLE" : "");
    if (report.unreliable && cfg.strict) {
        return kExitUnreliable;
    }
    return kExitOk;
}

int main_with_args(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (!args.empty() && (args[0] == "help" || args[0] == "--help" || args[0] == "-h")) {
        out << usage();
        return kExitOk;
    }
    RunConfig cfg;
    try {
        cfg = parse_args(args);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << usage();
        return e.exit_code();
    }
    return run_command(cfg, err);
}

}  // namespace microhmc::cli
