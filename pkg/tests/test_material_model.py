import math
import warnings

import pytest
from pydantic import ValidationError
from scipy import integrate

from stepplate.errors import DomainError
from stepplate.material_model import (
    MaterialPair,
    PlateConfig,
    beta_from_omega,
    density,
    flexural_rigidity,
    frequency_hz,
    omega_from_beta,
    plate_section_integrals,
    scale_factors,
    section_integrals,
    volume_fraction,
    youngs_modulus,
)
from tests.conftest import linear_gradient_integrals

TWO_STEP = [{"outer_radius": 1.0, "thickness": 0.2}, {"outer_radius": 2.0, "thickness": 0.1}]


class TestGradedProfile:

    def test_faces_are_pure_phases(self, fg_material):
        h1 = 0.2
        assert youngs_modulus(-h1 / 2, fg_material, h1) == pytest.approx(fg_material.E_c)
        assert youngs_modulus(h1 / 2, fg_material, h1) == pytest.approx(fg_material.E_m)
        assert density(-h1 / 2, fg_material, h1) == pytest.approx(fg_material.rho_c)
        assert density(h1 / 2, fg_material, h1) == pytest.approx(fg_material.rho_m)

    def test_linear_index_is_linear(self):
        assert volume_fraction(0.0, 0.2, 1.0) == pytest.approx(0.5)
        assert volume_fraction(0.05, 0.2, 1.0) == pytest.approx(0.75)

    def test_zero_index_is_all_metal_fraction(self):
        assert volume_fraction(-0.05, 0.2, 0.0) == 1.0

    def test_outside_thickness_rejected(self):
        with pytest.raises(DomainError):
            volume_fraction(0.11, 0.2, 1.0)

    def test_negative_index_rejected(self):
        with pytest.raises(DomainError):
            volume_fraction(0.0, 0.2, -1.0)


class TestSectionIntegrals:

    def test_homogeneous_plate(self, homogeneous_material):
        config = PlateConfig(material=homogeneous_material, segments=TWO_STEP, outer_bc="free")
        for ints in plate_section_integrals(config):
            assert ints.K1_bar == pytest.approx(1.0 / 0.91)
            assert ints.K2_bar == pytest.approx(0.0, abs=1e-14)
            assert ints.K3_bar == pytest.approx(1.0 / (12.0 * 0.91))
            assert ints.I1_bar == pytest.approx(1.0)
            assert ints.I2_bar == pytest.approx(0.0, abs=1e-14)
            assert ints.I3_bar == pytest.approx(1.0 / 12.0)

    def test_linear_gradient_matches_closed_form(self, two_step_plate):
        material = two_step_plate.material
        for segment, ints in zip(two_step_plate.segments, plate_section_integrals(two_step_plate)):
            expected = linear_gradient_integrals(material, segment.thickness / two_step_plate.h1)
            for name in ("I1_bar", "I2_bar", "I3_bar", "K1_bar", "K2_bar", "K3_bar"):
                assert getattr(ints, name) == pytest.approx(getattr(expected, name), rel=1e-10), name

    @pytest.mark.parametrize("g", [0.0, 0.5, 2.0, 5.0, 10.0])
    def test_power_law_matches_closed_form(self, fg_material, g):
        material = MaterialPair(**{**fg_material.model_dump(), "g": g})
        core = plate_section_integrals(PlateConfig(material=material, segments=TWO_STEP, outer_bc="free"))[0]

        def moments(contrast):
            return (
                1.0 + contrast / (g + 1.0),
                contrast * (1.0 / (g + 2.0) - 0.5 / (g + 1.0)),
                1.0 / 12.0 + contrast * (1.0 / (g + 3.0) - 1.0 / (g + 2.0) + 0.25 / (g + 1.0)),
            )

        nu2 = 1.0 - material.nu**2
        inertia = moments((material.rho_m - material.rho_c) / material.rho_c)
        stiffness = [v / nu2 for v in moments((material.E_m - material.E_c) / material.E_c)]
        actual = (core.I1_bar, core.I2_bar, core.I3_bar, core.K1_bar, core.K2_bar, core.K3_bar)
        for value, expected in zip(actual, (*inertia, *stiffness)):
            assert value == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_homogeneous_integrals_are_quiet(self, homogeneous_material):
        config = PlateConfig(material=homogeneous_material, segments=TWO_STEP, outer_bc="free")
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            plate_section_integrals(config)

    def test_thinner_segment_sees_smaller_coupling(self, two_step_plate):
        core, ring = plate_section_integrals(two_step_plate)
        assert ring.K2_bar == pytest.approx(core.K2_bar / 2.0, rel=1e-10)
        assert core.stiffness_det > 0
        assert ring.inertia_det > 0

    def test_segment_thicker_than_gradient_span_rejected(self, fg_material, two_step_plate):
        with pytest.raises(DomainError):
            section_integrals(two_step_plate.segments[0], fg_material, 0.1)


class TestPlateConfig:

    def test_segments_are_resolved(self, two_step_plate):
        core, ring = two_step_plate.segments
        assert (core.index, ring.index) == (1, 2)
        assert core.is_core and not ring.is_core
        assert ring.inner_radius == 1.0
        assert core.delta == pytest.approx(0.1)
        assert core.tau == pytest.approx(2.0)
        assert ring.tau == pytest.approx(1.0)
        assert two_step_plate.outer_radius == 2.0
        assert two_step_plate.reference_thickness == 0.1

    def test_annulus_starts_at_inner_radius(self, stepped_annulus):
        assert stepped_annulus.segments[0].inner_radius == 0.3
        assert not stepped_annulus.segments[0].is_core
        assert stepped_annulus.is_annular

    def test_empty_segments_names_field(self, fg_material):
        with pytest.raises(ValidationError) as exc:
            PlateConfig(material=fg_material, segments=[], outer_bc="free")
        assert "segments" in str(exc.value)

    @pytest.mark.parametrize(
        "segments",
        [
            [{"outer_radius": 2.0, "thickness": 0.2}, {"outer_radius": 1.0, "thickness": 0.1}],
            [{"outer_radius": 1.0, "thickness": 0.1}, {"outer_radius": 2.0, "thickness": 0.2}],
        ],
    )
    def test_bad_geometry_rejected(self, fg_material, segments):
        with pytest.raises(ValidationError):
            PlateConfig(material=fg_material, segments=segments, outer_bc="free")

    def test_circular_plate_has_no_inner_edge(self, fg_material):
        with pytest.raises(ValidationError, match="inner_bc"):
            PlateConfig(material=fg_material, segments=TWO_STEP, outer_bc="free", inner_bc="clamped")

    def test_annulus_needs_inner_edge(self, fg_material):
        with pytest.raises(ValidationError, match="inner_bc"):
            PlateConfig(material=fg_material, segments=TWO_STEP, plate_kind="annular", inner_radius=0.3,
                        outer_bc="free")
        with pytest.raises(ValidationError, match="inner_radius"):
            PlateConfig(material=fg_material, segments=TWO_STEP, plate_kind="annular", inner_radius=1.5,
                        inner_bc="free", outer_bc="free")

    def test_unknown_fields_rejected(self, fg_material):
        with pytest.raises(ValidationError):
            PlateConfig(material=fg_material, segments=TWO_STEP, outer_bc="free", colour="red")

    def test_poisson_ratio_bounds(self):
        with pytest.raises(ValidationError):
            MaterialPair(E_m=1.0, E_c=1.0, rho_m=1.0, rho_c=1.0, nu=0.5, g=1.0)

    def test_with_changes_revalidates(self, two_step_plate):
        free = two_step_plate.with_changes(outer_bc="free")
        assert free.outer_bc == "free"
        assert two_step_plate.outer_bc == "clamped"
        assert free.segments[1].inner_radius == 1.0
        with pytest.raises(ValidationError):
            two_step_plate.with_changes(segments=[])


class TestFrequencyScaling:

    def test_beta_definition(self, two_step_plate):
        material = two_step_plate.material
        D = flexural_rigidity(material, 0.1)
        omega = 1000.0
        expected = omega * 4.0 * math.sqrt(material.rho_c * 0.1 / D)
        assert beta_from_omega(two_step_plate, omega) == pytest.approx(expected)
        assert omega_from_beta(two_step_plate, expected) == pytest.approx(omega)
        assert frequency_hz(two_step_plate, expected) == pytest.approx(omega / (2 * math.pi))

    def test_scale_factors(self, two_step_plate):
        core = two_step_plate.segments[0]
        omega = omega_from_beta(two_step_plate, 12.0)
        scales = scale_factors(core, two_step_plate.material, two_step_plate, omega)
        assert scales.beta == pytest.approx(12.0)
        assert scales.lambda_i == pytest.approx(6.0)
        assert scales.delta == pytest.approx(0.1)
        assert scales.S1 == pytest.approx(0.01 / (12 * 0.91))

    def test_negative_frequency_rejected(self, two_step_plate):
        with pytest.raises(DomainError):
            scale_factors(two_step_plate.segments[0], two_step_plate.material, two_step_plate, -1.0)
