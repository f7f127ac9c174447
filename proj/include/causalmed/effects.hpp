#pragma once

#include <optional>
#include <string>

namespace causalmed {

enum class Estimand { DE, IE, TE, DM, TM, IM };

inline const char* estimand_name(Estimand e) {
    switch (e) {
        case Estimand::DE: return "DE";
        case Estimand::IE: return "IE";
        case Estimand::TE: return "TE";
        case Estimand::DM: return "DM";
        case Estimand::TM: return "TM";
        case Estimand::IM: return "IM";
    }
    return "?";
}

struct EffectEstimate {
    Estimand estimand = Estimand::DE;
    std::optional<int> mediator_index;  // 0-based
    double point = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.05;   // alpha
    std::string method;    // e.g. "ols", "qr", "qr-fast", "m1"
};

}  // namespace causalmed
