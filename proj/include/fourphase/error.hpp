#pragma once

#include <stdexcept>
#include <string>

namespace fourphase {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FOURPHASE_ERROR(Name)                          \
    class Name : public Error {                        \
    public:                                            \
        explicit Name(const std::string& what)         \
            : Error(#Name ": " + what) {}              \
    }

FOURPHASE_ERROR(AssumptionViolation);
FOURPHASE_ERROR(BadDimension);
FOURPHASE_ERROR(BadScales);
FOURPHASE_ERROR(OddWidth);
FOURPHASE_ERROR(DegenerateProjection);
FOURPHASE_ERROR(ZeroNeuron);
FOURPHASE_ERROR(HorizonTooShort);
FOURPHASE_ERROR(IncompleteTimeline);
FOURPHASE_ERROR(OutOfRegion);
FOURPHASE_ERROR(EmptyClass);
FOURPHASE_ERROR(Infeasible);
FOURPHASE_ERROR(Underdetermined);
FOURPHASE_ERROR(ConfigError);
FOURPHASE_ERROR(ParseError);

#undef FOURPHASE_ERROR

// carries the simulation time at which a weight or field went non-finite
class NonFinite : public Error {
public:
    NonFinite(const std::string& what, double t)
        : Error("NonFinite: " + what + " at t=" + std::to_string(t)), time(t) {}
    double time;
};

}  // namespace fourphase
