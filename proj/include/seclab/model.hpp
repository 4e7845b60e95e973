#pragma once

#include "seclab/bump.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace seclab {

/// Cylinder vector-field families.
enum class Family { Y0, Y1, Y2, Y3, Y4, Y3hat, Y4hat, Yperturbed };

/// How the cylinder field is used.
enum class Gluing {
    None,    ///< bare field on the cylinder chart
    Glued,   ///< G = psi X + (1 - psi) Y
    Slowed,  ///< G = psi X + (1 - psi) zeta Y
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ModelSpec {
    Family family = Family::Y0;
    Gluing gluing = Gluing::None;
    double omega = 2.0;       ///< fibre expansion rate of Y2
    int ell = 1;              ///< extra fibre dimensions (Y2, Y3hat, Y4hat)
    double zeta0 = 0.0;       ///< slowdown depth
    double epsilon = 0.02;    ///< gluing collar
    double outer_level = 13.0;///< constant m in H outside |x| <= 2; see README
    double u_radius = 0.05;   ///< radius of the base neighbourhood U
    BumpSpec xi0 = default_xi0();
    BumpSpec xi1 = default_xi1();

    bool glued() const { return gluing != Gluing::None; }

    /// Dimension of the cylinder chart.
    int dim() const
    {
        switch (family) {
        case Family::Y0:
        case Family::Y1:
        case Family::Yperturbed: return 2;
        case Family::Y2: return 2 + ell;
        case Family::Y3:
        case Family::Y4: return 3;
        case Family::Y3hat:
        case Family::Y4hat: return 3 + ell;
        }
        return 0;
    }

    /// Index of the coordinate running along the cylinder axis.
    int vertical_index() const
    {
        switch (family) {
        case Family::Y0:
        case Family::Y1:
        case Family::Yperturbed: return 1;
        case Family::Y2: return 1 + ell;
        default: return 2;
        }
    }

    std::vector<int> horizontal_indices() const
    {
        std::vector<int> h;
        for (int i = 0; i < dim(); ++i)
            if (i != vertical_index()) h.push_back(i);
        return h;
    }

    /// Rotationally symmetric in the first two coordinates.
    bool radial() const
    {
        return family == Family::Y3 || family == Family::Y4 || family == Family::Y3hat ||
               family == Family::Y4hat;
    }

    void validate() const
    {
        xi0.validate();
        xi1.validate();
        if (family == Family::Y2 && !(omega > 1.0))
            throw ConfigError("model.omega: Y2 requires omega > 1 for domination");
        if (!(omega > 0.0)) throw ConfigError("model.omega: must be positive");
        if ((family == Family::Y2 || family == Family::Y3hat || family == Family::Y4hat) && ell < 1)
            throw ConfigError("model.ell: must be at least 1 for this family");
        if (ell < 0) throw ConfigError("model.ell: must be nonnegative");
        if (!(zeta0 >= 0.0 && zeta0 < 1.0)) throw ConfigError("model.zeta0: must lie in [0,1)");
        if (zeta0 != 0.0 && gluing != Gluing::Slowed)
            throw ConfigError("model.zeta0: nonzero slowdown needs a slowed glued family (Ghat*)");
        if (!(epsilon > 0.0 && epsilon < 1.0 / 6.0))
            throw ConfigError("model.epsilon: must lie in (0, 1/6)");
        if (!(outer_level > 1.0)) throw ConfigError("model.outer_level: must exceed 1");
        if (!(u_radius > 0.0 && u_radius < 0.25)) throw ConfigError("model.u_radius: must lie in (0, 1/4)");
        if (gluing != Gluing::None && family == Family::Yperturbed)
            throw ConfigError("model.family: the perturbed field has no glued variant");
    }

    std::string name() const
    {
        static const char* base[] = {"0", "1", "2", "3", "4", "3hat", "4hat", "perturbed"};
        const std::string b = base[static_cast<int>(family)];
        switch (gluing) {
        case Gluing::None: return "Y" + b;
        case Gluing::Glued: return "G" + b;
        case Gluing::Slowed: return "Ghat" + b;
        }
        return "?";
    }

    /// Parses Y0..Y4, Y3hat, Y4hat, Yperturbed, G0..G4, G3hat, G4hat,
    /// Ghat0..Ghat4, Ghat3hat, Ghat4hat.
    static ModelSpec from_name(const std::string& n)
    {
        ModelSpec m;
        std::string rest;
        if (n.rfind("Ghat", 0) == 0) {
            m.gluing = Gluing::Slowed;
            rest = n.substr(4);
        } else if (n.rfind("G", 0) == 0) {
            m.gluing = Gluing::Glued;
            rest = n.substr(1);
        } else if (n.rfind("Y", 0) == 0) {
            rest = n.substr(1);
        } else {
            throw ConfigError("model.family: unknown family '" + n + "'");
        }
        if (rest == "0") m.family = Family::Y0;
        else if (rest == "1") m.family = Family::Y1;
        else if (rest == "2") m.family = Family::Y2;
        else if (rest == "3") m.family = Family::Y3;
        else if (rest == "4") m.family = Family::Y4;
        else if (rest == "3hat") m.family = Family::Y3hat;
        else if (rest == "4hat") m.family = Family::Y4hat;
        else if (rest == "perturbed" && m.gluing == Gluing::None) m.family = Family::Yperturbed;
        else throw ConfigError("model.family: unknown family '" + n + "'");
        return m;
    }
};

} // namespace seclab
