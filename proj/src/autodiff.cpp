// SPDX-License-Identifier: Apache-2.0
#include "sdfscene/autodiff.hpp"

namespace sdfscene {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }
void Tape::set_active(Tape* tape) { g_active_tape = tape; }

GradcheckReport gradcheck(const TapeFn& f, std::span<const double> x, double h, double tol) {
    const size_t n = x.size();
    GradcheckReport report;
    report.coords.resize(n);

    // Analytic gradient at the base point.
    Tape base;
    std::vector<double> analytic;
    {
        TapeScope scope(base);
        std::vector<DiffValue> leaves;
        leaves.reserve(n);
        std::vector<int32_t> handles;
        handles.reserve(n);
        for (double xi : x) {
            leaves.push_back(base.leaf(xi));
            handles.push_back(leaves.back().idx);
        }
        const DiffValue y = f(leaves);
        analytic = base.gradient(y, handles);
    }

    // One forward evaluation; returns value and branch signature.
    const auto probe = [&](std::vector<double>& pt) -> std::pair<double, uint64_t> {
        Tape tape;
        TapeScope scope(tape);
        std::vector<DiffValue> leaves;
        leaves.reserve(n);
        for (double xi : pt) leaves.push_back(tape.leaf(xi));
        const DiffValue y = f(leaves);
        return {y.value(), tape.branch_signature()};
    };

    std::vector<double> pt(x.begin(), x.end());
    for (size_t i = 0; i < n; ++i) {
        const double xi = pt[i];
        pt[i] = xi + h;
        const auto [fp, sigp] = probe(pt);
        pt[i] = xi - h;
        const auto [fm, sigm] = probe(pt);
        pt[i] = xi;

        GradcheckCoord& c = report.coords[i];
        c.analytic = analytic[i];
        c.fd = (fp - fm) / (2.0 * h);
        c.kink_adjacent = (sigp != sigm);
        if (c.kink_adjacent) continue;
        c.rel_err = std::abs(c.fd - c.analytic) / std::max(1.0, std::abs(c.analytic));
        c.pass = c.rel_err <= tol;
        ++report.checked;
        if (c.pass) ++report.passed;
    }
    report.pass_fraction = report.checked == 0 ? 1.0
                                               : static_cast<double>(report.passed) /
                                                     static_cast<double>(report.checked);
    report.all_pass = report.passed == report.checked;
    return report;
}

} // namespace sdfscene
