#include "mglm/fusion.hpp"

namespace mglm {

const char* fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::max_pool:
            return "max_pool";
        case FusionMode::mean_pool:
            return "mean_pool";
        case FusionMode::concat:
            return "concat";
        case FusionMode::single_grained:
            return "single_grained";
    }
    return "?";
}

}  // namespace mglm
