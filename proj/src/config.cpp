#include "icicle/config.hpp"

#include <fstream>
#include <sstream>

#include "icicle/errors.hpp"

namespace icicle {

void validate(const Config& cfg) {
    if (cfg.tau_i <= 0.0) throw ConfigError("tau_i must be positive");
    if (cfg.tau_c <= 0.0) throw ConfigError("tau_c must be positive");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
    if (cfg.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.fuse_sigma < 0.0 || cfg.fuse_gamma < 0.0) {
        throw ConfigError("fusion coefficients must be >= 0");
    }
    if (cfg.fuse_sigma + cfg.fuse_gamma > 1.0) {
        throw ConfigError("fusion coefficients must satisfy sigma + gamma <= 1");
    }
    if (cfg.alpha < 0.0 || cfg.beta < 0.0 || cfg.eta < 0.0) {
        throw ConfigError("loss weights alpha, beta, eta must be >= 0");
    }
    if (cfg.t_heat <= 0.0) throw ConfigError("t_heat must be positive");
    if (cfg.t_dof <= 0.0) throw ConfigError("t_dof must be positive");
    if (cfg.graph_mode == GraphMode::kTwoScale && cfg.k_a == cfg.k_b) {
        throw ConfigError("k_a and k_b must differ for two-scale graphs");
    }
    if (cfg.k_a < 1 || cfg.k_b < 1 || cfg.k_single < 1) {
        throw ConfigError("neighbor counts must be >= 1");
    }
    if (cfg.iterations < 0) throw ConfigError("iterations must be >= 0");
    if (cfg.feature_dim < 1 || cfg.proj_dim < 1) {
        throw ConfigError("model widths must be positive");
    }
}

void validate(const RunConfig& cfg) {
    validate(cfg.config);
    if (cfg.data_path.empty()) throw ConfigError("run config: data path is required");
    if (cfg.out_dir.empty()) throw ConfigError("run config: out_dir is required");
    if (cfg.data_path == cfg.out_dir) {
        throw ConfigError("run config: data path and out_dir must be distinct");
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig rc;
    Config& c = rc.config;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "model" && section != "phase1" &&
                section != "graph" && section != "phase2") {
                throw ConfigError("unknown config section '" + section + "'");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section + "." + key;

        if (qualified == "run.data") {
            rc.data_path = value;
        } else if (qualified == "run.out_dir") {
            rc.out_dir = value;
        } else if (qualified == "run.seed") {
            c.seed = static_cast<std::uint64_t>(parse_int(qualified, value));
        } else if (qualified == "model.feature_dim") {
            c.feature_dim = static_cast<std::size_t>(parse_int(qualified, value));
        } else if (qualified == "model.proj_dim") {
            c.proj_dim = static_cast<std::size_t>(parse_int(qualified, value));
        } else if (qualified == "phase1.tau_i") {
            c.tau_i = parse_double(qualified, value);
        } else if (qualified == "phase1.tau_c") {
            c.tau_c = parse_double(qualified, value);
        } else if (qualified == "phase1.batch_size") {
            c.batch_size = static_cast<std::size_t>(parse_int(qualified, value));
        } else if (qualified == "phase1.learning_rate") {
            c.learning_rate = parse_double(qualified, value);
        } else if (qualified == "phase1.epochs") {
            c.epochs = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "phase1.use_cis") {
            c.use_cis = parse_bool(qualified, value);
        } else if (qualified == "phase1.use_ccs") {
            c.use_ccs = parse_bool(qualified, value);
        } else if (qualified == "graph.t_heat") {
            c.t_heat = parse_double(qualified, value);
        } else if (qualified == "graph.k_a") {
            c.k_a = static_cast<std::size_t>(parse_int(qualified, value));
        } else if (qualified == "graph.k_b") {
            c.k_b = static_cast<std::size_t>(parse_int(qualified, value));
        } else if (qualified == "graph.mode") {
            if (value == "two_scale") {
                c.graph_mode = GraphMode::kTwoScale;
            } else if (value == "single") {
                c.graph_mode = GraphMode::kSingle;
            } else {
                throw ConfigError("graph.mode must be 'two_scale' or 'single', got '" + value +
                                  "'");
            }
        } else if (qualified == "graph.k_single") {
            c.k_single = static_cast<std::size_t>(parse_int(qualified, value));
        } else if (qualified == "phase2.alpha") {
            c.alpha = parse_double(qualified, value);
        } else if (qualified == "phase2.beta") {
            c.beta = parse_double(qualified, value);
        } else if (qualified == "phase2.eta") {
            c.eta = parse_double(qualified, value);
        } else if (qualified == "phase2.sigma") {
            c.fuse_sigma = parse_double(qualified, value);
        } else if (qualified == "phase2.gamma") {
            c.fuse_gamma = parse_double(qualified, value);
        } else if (qualified == "phase2.t_dof") {
            c.t_dof = parse_double(qualified, value);
        } else if (qualified == "phase2.iterations") {
            c.iterations = static_cast<int>(parse_int(qualified, value));
        } else {
            throw ConfigError("unknown config key '" + qualified + "'");
        }
    }
    // path fields are validated by the pipeline; stepwise commands pass them
    // on the command line instead
    validate(rc.config);
    return rc;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return parse_run_config_text(buffer.str());
}

}  // namespace icicle
