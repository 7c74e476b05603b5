#pragma once

#include "mocos/csp.hpp"
#include "mocos/encoder.hpp"
#include "mocos/motifs.hpp"
#include "mocos/reid_eval.hpp"
#include "mocos/skeleton.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mocos {

/// Every tunable of a run. Parsed from `key = value` lines; absent keys keep
/// their defaults.
struct RunConfig {
    // model
    int D = 128;
    int L = 2;
    int H = 8;
    int D_k = 16;
    std::optional<int> K;   // auto: min(8, J - 1)
    MaskMode mask_mode = MaskMode::Literal;
    HsmSelf hsm_self = HsmSelf::Include;
    PeSign pe_sign = PeSign::Deterministic;
    bool use_hsm = true;
    bool use_gcm = true;
    double ln_eps = 1e-5;

    // sub-skeleton / sub-tracklet contrast
    int f = 6;
    double p_s = 0.25;
    double p_t = 0.25;
    double lambda = 0.5;
    double tau1 = 0.07;
    double tau2 = 0.07;
    bool normalize = true;
    bool use_csp = true;
    double l2_eps = 1e-12;

    // optimisation
    double lr = 3.5e-4;
    int batch = 32;
    int epochs = 50;
    std::uint64_t seed = 1;

    // data and evaluation
    Metric metric = Metric::Cosine;
    std::string layout = "kinect20";
    std::vector<int> limbs_upper;   // empty: dataset or layout default
    std::vector<int> limbs_lower;

    /// Range checks; messages name the offending key.
    void validate() const;

    EncoderConfig encoder_config(int joints) const;
    CspConfig csp_config() const;

    /// Canonical `key = value` text, one key per line in a fixed order.
    std::string echo() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Names of every accepted key, in echo order.
const std::vector<std::string>& config_keys();

/// Assigns one key from its text value; throws ValidationError on unknown
/// keys or malformed values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Parses `key = value` lines with `#` comments over `base`, then validates.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Applies `overrides` (key -> value) over `base`, then validates.
RunConfig apply_overrides(RunConfig base, const std::map<std::string, std::string>& overrides);

} // namespace mocos
