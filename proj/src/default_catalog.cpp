#include "narrowline/core_data.hpp"

namespace narrowline {

namespace {

// Schema: see "Catalog" in README.md. Values are the measured table rows;
// entries marked "config" are inputs chosen for order-of-magnitude
// estimates, not measured data.
constexpr std::string_view kDefaultCatalog = R"yaml(# narrowline default catalog
isomers:
  - name: 57Fe
    E0_keV: 14.4
    tau0_s: 1.4e-7
    Ig: 1/2
    Ie: 3/2
  - name: 67Zn
    E0_keV: 93.3
    tau0_s: 1.3e-5
    Ig: 5/2
    Ie: 1/2
  - name: 229Th
    E0_keV: 8.4e-3
    tau0_s: 641
    Ig: 5/2
    Ie: 3/2
  - name: 45Sc
    E0_keV: 12.389
    tau0_s: 0.47
    Ig: 7/2
    Ie: 3/2
    alphaK: 390
    omegaK: 0.19
    Qratio: -1.45
    mu_g: 4.756          # external data (nuclear moment tables)
    mu_e: 0.35           # config
  - name: 109Ag
    E0_keV: 88.0
    tau0_s: 57.1
    Ig: 1/2
    Ie: 7/2

targets:
  - name: Sc
    Le_um: 60
    N0_cm3: 3.98e22
    L_um: 120
    xi: 2.3
    xi_opt: 2.27
    eQgVzz_MHz: [1.74, 2.01]
    eta: [0, 0]
    magnetism: paramagnetic
    density_g_cm3: 2.985
    dipole_r_A: 3.2      # config
  - name: ScN
    Le_um: 54.5
    N0_cm3: 4.37e22
    L_um: 110
    xi: 2.3
    xi_opt: 2.26
    eQgVzz_MHz: [0, 0]
    eta: [0, 0]
    magnetism: diamagnetic
    density_g_cm3: 4.28
    dipole_r_A: 2.2      # config
  - name: Sc2O3
    Le_um: 69.7
    N0_cm3: 3.18e22
    L_um: 140
    xi: 2.1
    xi_opt: 2.11
    eQgVzz_MHz: [15.5, 24.4]
    eta: [0.69, 0]
    magnetism: diamagnetic
    density_g_cm3: 3.86
    dipole_r_A: 3.3      # config
  - name: ScF3
    Le_um: 146
    N0_cm3: 1.54e22
    L_um: ~
    xi: ~
    xi_opt: 2.14
    eQgVzz_MHz: [0, 0]
    eta: [0, 0]
    magnetism: diamagnetic
    density_g_cm3: 2.57
    dipole_r_A: 4.0      # config
  - name: ScAlMgO4
    Le_um: 133
    N0_cm3: 0.88e22
    L_um: 450
    xi: 1.9
    xi_opt: 1.11
    eQgVzz_MHz: ~
    eta: ~
    magnetism: diamagnetic
    density_g_cm3: 3.64
    dipole_r_A: 3.3      # config

beamline:
  Ep_mJ: 0.55
  Ebg_mJ: 0.08
  dEp_eV: 0.6
  np: 400
  pulse_spacing_s: 440e-9
  train_duration_s: 0.18e-3
  rep_rate_Hz: 10
  elements:
    - {name: beamline_optics, transmission: 0.44, point: resonance-detection unit}
    - {name: Sc_foil_25um, transmission: 0.66}
    - {name: air_0.75m, transmission: 0.7}
    - {name: CVD_diamond_700um, transmission: 0.75}
    - {name: glassy_carbon_800um, transmission: 0.87, point: NFS target}

# energy_sigma_eV: 300 eV FWHM resolution expressed as a Gaussian sigma.
detectors:
  - name: Du
    energy_sigma_eV: 127.4
    background_rate: 0.9
    gate_open_s: 0
    gate_close_s: 0.1
    energy_range_keV: [1.0, 20.0]
  - name: Dd
    energy_sigma_eV: 127.4
    background_rate: 0.9
    gate_open_s: 0
    gate_close_s: 0.1
    energy_range_keV: [1.0, 20.0]
  - name: Dnfs
    energy_sigma_eV: 127.4
    background_rate: 0.9
    gate_open_s: 0.002
    gate_close_s: 0.1
    energy_range_keV: [1.0, 20.0]
)yaml";

} // namespace

std::string_view default_catalog_text() { return kDefaultCatalog; }

} // namespace narrowline
