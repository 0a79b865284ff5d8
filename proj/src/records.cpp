#include "rw/records.hpp"

namespace rw {

const char* quality_name(Quality q) {
    switch (q) {
        case Quality::Ok: return "ok";
        case Quality::Partial: return "partial";
        case Quality::Missing: return "missing";
    }
    return "?";
}

}  // namespace rw
