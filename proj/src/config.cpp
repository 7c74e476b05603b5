#include "mocos/config.hpp"

#include "mocos/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mocos {

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    throw ValidationError("config key '" + key + "': cannot parse '" + value + "', expected " + expected);
}

template <class T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
    T v{};
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size())
        bad_value(key, value, expected);
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "on" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "off" || value == "0" || value == "no") return false;
    bad_value(key, value, "true or false");
}

std::vector<int> parse_index_csv(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (value.empty() || value == "auto") return out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        const std::size_t comma = std::min(value.find(',', pos), value.size());
        out.push_back(parse_number<int>(key, trim(value.substr(pos, comma - pos)), "comma-separated joint indices"));
        pos = comma + 1;
    }
    return out;
}

std::string join_csv(const std::vector<int>& v) {
    if (v.empty()) return "auto";
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

void require(bool ok, const std::string& key, const std::string& range) {
    if (!ok) throw ValidationError("config key '" + key + "' out of range: must be " + range);
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "D",      "L",         "H",      "D_k",       "K",       "mask_mode", "hsm_self", "pe_sign",
        "use_hsm", "use_gcm",  "ln_eps", "f",         "p_s",     "p_t",       "lambda",   "tau1",
        "tau2",   "normalize", "use_csp", "l2_eps",   "lr",      "batch",     "epochs",   "seed",
        "metric", "layout",    "limbs_upper", "limbs_lower"};
    return keys;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "D") c.D = parse_number<int>(key, v, "an integer");
    else if (key == "L") c.L = parse_number<int>(key, v, "an integer");
    else if (key == "H") c.H = parse_number<int>(key, v, "an integer");
    else if (key == "D_k") c.D_k = parse_number<int>(key, v, "an integer");
    else if (key == "K") c.K = v == "auto" ? std::nullopt : std::optional<int>(parse_number<int>(key, v, "an integer or auto"));
    else if (key == "mask_mode") {
        if (v == "literal") c.mask_mode = MaskMode::Literal;
        else if (v == "additive") c.mask_mode = MaskMode::Additive;
        else bad_value(key, v, "literal or additive");
    } else if (key == "hsm_self") {
        if (v == "include") c.hsm_self = HsmSelf::Include;
        else if (v == "exclude") c.hsm_self = HsmSelf::Exclude;
        else bad_value(key, v, "include or exclude");
    } else if (key == "pe_sign") {
        if (v == "deterministic") c.pe_sign = PeSign::Deterministic;
        else if (v == "random") c.pe_sign = PeSign::Random;
        else bad_value(key, v, "deterministic or random");
    } else if (key == "use_hsm") c.use_hsm = parse_bool(key, v);
    else if (key == "use_gcm") c.use_gcm = parse_bool(key, v);
    else if (key == "ln_eps") c.ln_eps = parse_number<double>(key, v, "a real number");
    else if (key == "f") c.f = parse_number<int>(key, v, "an integer");
    else if (key == "p_s") c.p_s = parse_number<double>(key, v, "a real number");
    else if (key == "p_t") c.p_t = parse_number<double>(key, v, "a real number");
    else if (key == "lambda") c.lambda = parse_number<double>(key, v, "a real number");
    else if (key == "tau1") c.tau1 = parse_number<double>(key, v, "a real number");
    else if (key == "tau2") c.tau2 = parse_number<double>(key, v, "a real number");
    else if (key == "normalize") c.normalize = parse_bool(key, v);
    else if (key == "use_csp") c.use_csp = parse_bool(key, v);
    else if (key == "l2_eps") c.l2_eps = parse_number<double>(key, v, "a real number");
    else if (key == "lr") c.lr = parse_number<double>(key, v, "a real number");
    else if (key == "batch") c.batch = parse_number<int>(key, v, "an integer");
    else if (key == "epochs") c.epochs = parse_number<int>(key, v, "an integer");
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v, "a non-negative integer");
    else if (key == "metric") {
        if (v == "cosine") c.metric = Metric::Cosine;
        else if (v == "euclidean") c.metric = Metric::Euclidean;
        else bad_value(key, v, "cosine or euclidean");
    } else if (key == "layout") {
        if (v.empty()) bad_value(key, v, "a layout name");
        c.layout = v;
    } else if (key == "limbs_upper") c.limbs_upper = parse_index_csv(key, v);
    else if (key == "limbs_lower") c.limbs_lower = parse_index_csv(key, v);
    else throw ValidationError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
    require(D >= 1, "D", ">= 1");
    require(L >= 0, "L", ">= 0");
    require(H >= 1, "H", ">= 1");
    require(D_k >= 1, "D_k", ">= 1");
    if (H * D_k != D)
        throw ValidationError("config keys 'H' and 'D_k': H * D_k must equal D (" + std::to_string(H) + " * " +
                              std::to_string(D_k) + " != " + std::to_string(D) + ")");
    if (K) require(*K >= 1, "K", ">= 1 and <= J - 1, or auto");
    require(ln_eps > 0.0, "ln_eps", "> 0");
    require(f >= 1, "f", ">= 1");
    require(p_s >= 0.0 && p_s < 1.0, "p_s", "in [0, 1)");
    require(p_t >= 0.0 && p_t < 1.0, "p_t", "in [0, 1)");
    require(lambda >= 0.0 && lambda <= 1.0, "lambda", "in [0, 1]");
    require(tau1 > 0.0, "tau1", "> 0");
    require(tau2 > 0.0, "tau2", "> 0");
    require(l2_eps > 0.0, "l2_eps", "> 0");
    require(lr >= 0.0 && std::isfinite(lr), "lr", ">= 0");
    require(batch >= 1, "batch", ">= 1");
    require(epochs >= 0, "epochs", ">= 0");
    if (layout != "custom" && !builtin_layout(layout)) {
        std::string names;
        for (const auto& n : builtin_layout_names()) names += n + ", ";
        throw ValidationError("config key 'layout' out of range: must be one of " + names + "or custom");
    }
    if (limbs_upper.empty() != limbs_lower.empty())
        throw ValidationError("config keys 'limbs_upper' and 'limbs_lower' must be given together");
    for (int j : limbs_upper) require(j >= 1, "limbs_upper", "joint indices >= 1");
    for (int j : limbs_lower) require(j >= 1, "limbs_lower", "joint indices >= 1");
    if (!limbs_upper.empty()) {
        try {
            LimbSets{limbs_upper, limbs_lower}.validate(std::max(*std::max_element(limbs_upper.begin(), limbs_upper.end()),
                                                                 *std::max_element(limbs_lower.begin(), limbs_lower.end())));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("config keys 'limbs_upper'/'limbs_lower': ") + e.what());
        }
    }
    if (mask_mode == MaskMode::Additive && use_gcm && H >= 4)
        throw ValidationError("config key 'mask_mode': additive masking needs use_gcm = false or H <= 3, "
                              "since collaborative motif rows outside their limb set have empty support");
}

EncoderConfig RunConfig::encoder_config(int joints) const {
    validate();
    EncoderConfig e;
    e.d_model = D;
    e.layers = L;
    e.heads = H;
    e.d_head = D_k;
    e.pe_width = K ? *K : default_pe_width(joints);
    require(e.pe_width <= joints - 1, "K", "<= J - 1 = " + std::to_string(joints - 1));
    e.mask_mode = mask_mode;
    e.ln_eps = ln_eps;
    return e;
}

CspConfig RunConfig::csp_config() const {
    CspConfig c;
    c.lambda = lambda;
    c.tau1 = tau1;
    c.tau2 = tau2;
    c.p_s = p_s;
    c.p_t = p_t;
    c.normalize = normalize;
    c.l2_eps = l2_eps;
    c.use_csp = use_csp;
    return c;
}

std::string RunConfig::echo() const {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    std::ostringstream os;
    os << "D = " << D << '\n'
       << "L = " << L << '\n'
       << "H = " << H << '\n'
       << "D_k = " << D_k << '\n'
       << "K = " << (K ? std::to_string(*K) : std::string("auto")) << '\n'
       << "mask_mode = " << (mask_mode == MaskMode::Literal ? "literal" : "additive") << '\n'
       << "hsm_self = " << (hsm_self == HsmSelf::Include ? "include" : "exclude") << '\n'
       << "pe_sign = " << (pe_sign == PeSign::Deterministic ? "deterministic" : "random") << '\n'
       << "use_hsm = " << b(use_hsm) << '\n'
       << "use_gcm = " << b(use_gcm) << '\n'
       << "ln_eps = " << format_double(ln_eps) << '\n'
       << "f = " << f << '\n'
       << "p_s = " << format_double(p_s) << '\n'
       << "p_t = " << format_double(p_t) << '\n'
       << "lambda = " << format_double(lambda) << '\n'
       << "tau1 = " << format_double(tau1) << '\n'
       << "tau2 = " << format_double(tau2) << '\n'
       << "normalize = " << b(normalize) << '\n'
       << "use_csp = " << b(use_csp) << '\n'
       << "l2_eps = " << format_double(l2_eps) << '\n'
       << "lr = " << format_double(lr) << '\n'
       << "batch = " << batch << '\n'
       << "epochs = " << epochs << '\n'
       << "seed = " << seed << '\n'
       << "metric = " << to_string(metric) << '\n'
       << "layout = " << layout << '\n'
       << "limbs_upper = " << join_csv(limbs_upper) << '\n'
       << "limbs_lower = " << join_csv(limbs_lower) << '\n';
    return os.str();
}

RunConfig parse_config(std::istream& in, RunConfig base) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        try {
            set_config_value(base, key, line.substr(eq + 1));
        } catch (const ValidationError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    base.validate();
    return base;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    return parse_config(is, std::move(base));
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path + "'");
    return parse_config(in, std::move(base));
}

RunConfig apply_overrides(RunConfig base, const std::map<std::string, std::string>& overrides) {
    for (const auto& [k, v] : overrides) set_config_value(base, k, v);
    base.validate();
    return base;
}

} // namespace mocos
