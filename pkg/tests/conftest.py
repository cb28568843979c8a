import pytest

from stepplate.cli import load_plate_config
from stepplate.material_model import MaterialPair, PlateConfig, SectionIntegrals

E_M, E_C = 70e9, 380e9
RHO_M, RHO_C = 2700.0, 3800.0


def linear_gradient_integrals(material: MaterialPair, thickness_ratio: float) -> SectionIntegrals:
    """Section integrals for g = 1 over a segment of thickness t * h1, in closed form."""
    t = thickness_ratio
    nu2 = 1.0 - material.nu**2
    dE = (material.E_m - material.E_c) / material.E_c
    dR = (material.rho_m - material.rho_c) / material.rho_c
    return SectionIntegrals(
        I1_bar=1.0 + dR / 2.0,
        I2_bar=dR * t / 12.0,
        I3_bar=1.0 / 12.0 + dR / 24.0,
        K1_bar=(1.0 + dE / 2.0) / nu2,
        K2_bar=dE * t / 12.0 / nu2,
        K3_bar=(1.0 / 12.0 + dE / 24.0) / nu2,
    )


@pytest.fixture
def fg_material() -> MaterialPair:
    return MaterialPair(E_m=E_M, E_c=E_C, rho_m=RHO_M, rho_c=RHO_C, nu=0.3, g=1.0)


@pytest.fixture
def homogeneous_material() -> MaterialPair:
    return MaterialPair(E_m=E_C, E_c=E_C, rho_m=RHO_C, rho_c=RHO_C, nu=0.3, g=1.0)


@pytest.fixture
def two_step_plate(fg_material) -> PlateConfig:
    return PlateConfig(
        material=fg_material,
        segments=[{"outer_radius": 1.0, "thickness": 0.2}, {"outer_radius": 2.0, "thickness": 0.1}],
        outer_bc="clamped",
    )


@pytest.fixture
def stepped_annulus(fg_material) -> PlateConfig:
    return PlateConfig(
        material=fg_material,
        segments=[{"outer_radius": 1.0, "thickness": 0.2}, {"outer_radius": 2.0, "thickness": 0.1}],
        plate_kind="annular",
        inner_radius=0.3,
        inner_bc="clamped",
        outer_bc="clamped",
    )


@pytest.fixture
def thin_clamped() -> PlateConfig:
    return load_plate_config("thin_clamped_homogeneous")


@pytest.fixture
def table1_free() -> PlateConfig:
    return load_plate_config("table1_free")


@pytest.fixture
def table1_clamped() -> PlateConfig:
    return load_plate_config("table1_clamped")
