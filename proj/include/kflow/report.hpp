#pragma once
// Named bound -> measured constants, worst violation and its location.

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace kflow {

struct EstimateReport {
    enum class Kind { LowerBound, UpperBound, Record };

    std::string name;
    Kind kind = Kind::Record;
    std::map<std::string, double> measured;
    double worst_violation = 0.0;  // signed; negative means violated for lower-bound checks
    double x = std::numeric_limits<double>::quiet_NaN();
    double time = std::numeric_limits<double>::quiet_NaN();
    double tolerance = 0.0;
    double budget = std::numeric_limits<double>::infinity();  // upper-bound checks
    std::string note;

    bool pass() const {
        switch (kind) {
            case Kind::LowerBound: return worst_violation >= -tolerance;
            case Kind::UpperBound: return value() <= budget;
            case Kind::Record: return true;
        }
        return true;
    }
    /// Headline measured value for upper-bound reports.
    double value() const {
        auto it = measured.find("value");
        return it == measured.end() ? worst_violation : it->second;
    }

    static EstimateReport lower(std::string name, double worst, double tol) {
        EstimateReport r;
        r.name = std::move(name);
        r.kind = Kind::LowerBound;
        r.worst_violation = worst;
        r.tolerance = tol;
        return r;
    }
    static EstimateReport upper(std::string name, double value, double budget) {
        EstimateReport r;
        r.name = std::move(name);
        r.kind = Kind::UpperBound;
        r.measured["value"] = value;
        r.budget = budget;
        return r;
    }
    static EstimateReport record(std::string name) {
        EstimateReport r;
        r.name = std::move(name);
        return r;
    }
};

using ReportList = std::vector<EstimateReport>;

inline const EstimateReport* find_report(const ReportList& rs, const std::string& name) {
    for (const auto& r : rs)
        if (r.name == name) return &r;
    return nullptr;
}

inline bool all_pass(const ReportList& rs) {
    for (const auto& r : rs)
        if (!r.pass()) return false;
    return true;
}

}  // namespace kflow
