#include "lrob/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lrob {

double gamma_profile(double y) { return y <= 0.0 ? 1.0 : std::exp(-y); }

double g_factor(double z) {
    const double a = 2.0 + z;
    const double b = 1.0 + z;
    return 2.0 * z * z * a * a / (b * b * (8.0 + 3.0 * z));
}

static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void ModelParams::validate() const {
    require(std::isfinite(D_latent) && D_latent > 0.0, "D_latent must be > 0");
    require(std::isfinite(D_revealed) && D_revealed >= 0.0,
            "D_revealed must be >= 0");
    require(std::isfinite(omega_reveal) && omega_reveal > 0.0,
            "omega must be > 0");
    require(std::isfinite(omega_unreveal) && omega_unreveal > 0.0,
            "omega_unreveal must be > 0");
    require(std::isfinite(k) && k > 0.0, "k must be > 0");
    require(std::isfinite(L_latent) && L_latent > 0.0, "L_latent must be > 0");
}

bool ModelParams::equal_rates() const { return omega_reveal == omega_unreveal; }

double ModelParams::ell_latent() const {
    return std::sqrt(D_latent / omega_reveal);
}

double ModelParams::ell_revealed() const {
    return std::sqrt(D_revealed / omega_reveal);
}

DerivedScales derived_scales(const ModelParams& p, double zeta_c) {
    p.validate();
    if (!(zeta_c > 0.0)) throw std::invalid_argument("zeta_c must be > 0");
    DerivedScales s;
    s.ell_latent = p.ell_latent();
    s.ell_revealed = p.ell_revealed();
    s.conversion_flux = p.L_latent * p.omega_reveal / (p.k * p.k);
    s.revealed_flux = p.D_revealed * p.L_latent;
    s.omega_critical = p.D_latent * p.k * p.k / (zeta_c * zeta_c);
    return s;
}

static double number_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) {
        throw std::invalid_argument(std::string("missing key: ") + key);
    }
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw std::invalid_argument(std::string("key is not a number: ") + key);
    }
    return v.get<double>();
}

ModelParams params_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("bad JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("params must be an object");
    static const char* allowed[] = {"D_latent", "D_revealed", "omega",
                                    "k",        "L_latent",   "omega_unreveal"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) {
            throw std::invalid_argument("unknown key in params: " + it.key());
        }
    }
    ModelParams p;
    p.D_latent = number_field(j, "D_latent");
    p.D_revealed = number_field(j, "D_revealed");
    p.omega_reveal = number_field(j, "omega");
    p.omega_unreveal =
        j.contains("omega_unreveal") ? number_field(j, "omega_unreveal")
                                     : p.omega_reveal;
    p.k = number_field(j, "k");
    p.L_latent = number_field(j, "L_latent");
    p.validate();
    return p;
}

ModelParams params_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open params file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return params_from_json_text(ss.str());
}

std::string params_to_json_text(const ModelParams& p) {
    nlohmann::json j;
    j["D_latent"] = p.D_latent;
    j["D_revealed"] = p.D_revealed;
    j["omega"] = p.omega_reveal;
    if (p.omega_unreveal != p.omega_reveal) {
        j["omega_unreveal"] = p.omega_unreveal;
    }
    j["k"] = p.k;
    j["L_latent"] = p.L_latent;
    return j.dump(2);
}

} // namespace lrob
