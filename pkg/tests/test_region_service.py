import json

import numpy as np
import pytest

from polyapprox.exceptions import EmptyRegionError, SpecError, UnboundedRegionError, UsageError
from polyapprox.models import ThetaBox
from polyapprox.region_types import HypercubeRegion, HypersphereRegion
from polyapprox.services import region_service


class TestParseRegion:
    @pytest.mark.parametrize('text', ['{not json', '[1, 2]', '"hypercube"'])
    def test_malformed_text(self, text):
        with pytest.raises(SpecError):
            region_service.parse_region(text)

    def test_unknown_type(self):
        with pytest.raises(SpecError, match='Known types'):
            region_service.parse_region({'type': 'torus'})

    def test_unsupported_schema(self):
        with pytest.raises(SpecError):
            region_service.parse_region({'schema': 2, 'type': 'hypercube', 'n': 2})

    def test_missing_field(self):
        with pytest.raises(SpecError, match="'n'"):
            region_service.parse_region({'type': 'hypercube'})

    def test_non_numeric_field(self):
        with pytest.raises(SpecError):
            region_service.parse_region({'type': 'hypersphere', 'n': 2, 'radius': 'big'})

    def test_spec_error_is_a_usage_error(self):
        with pytest.raises(UsageError):
            region_service.parse_region('{')

    def test_json_text(self):
        region = region_service.parse_region(json.dumps({'type': 'hypercube', 'n': 3}))
        assert isinstance(region, HypercubeRegion)
        assert region.dim == 3

    def test_polygon_from_sides(self):
        region = region_service.parse_region({'type': 'polygon2d', 'sides': 5, 'radius': 2})
        assert region.base_params['vertices'].shape == (5, 2)
        assert region.support(None, [1.0, 0.0])[1] == pytest.approx(2.0)

    def test_unbounded(self):
        with pytest.raises(UnboundedRegionError):
            region_service.parse_region({'type': 'linear_lifted', 'G': [[1, 0], [0, 1], [-1, 0]],
                                         'h': [1, 1, 1], 'x_dims': [0, 1]})

    def test_empty_box(self):
        with pytest.raises(EmptyRegionError):
            region_service.parse_region({'type': 'hypercube', 'n': 2, 'lo': 2, 'hi': 1})

    def test_empty_system(self):
        with pytest.raises(EmptyRegionError):
            region_service.parse_region({'type': 'linear_lifted', 'G': [[1], [-1]], 'h': [0, -1], 'x_dims': [0]})

    def test_empty_at_a_box_corner(self):
        doc = {'type': 'hypersphere', 'n': 2, 'radius': 1.0,
               'theta_box': {'lower': [0], 'upper': [1]}, 'modulation': {'radius': [[-1.5]]}}
        with pytest.raises(EmptyRegionError):
            region_service.parse_region(doc)

    def test_bad_theta_box(self):
        with pytest.raises(SpecError):
            region_service.parse_region({'type': 'hypersphere', 'n': 2,
                                         'theta_box': {'lower': [1], 'upper': [0]}})

    def test_minkowski_dimension_check(self):
        with pytest.raises(SpecError):
            region_service.parse_region({'type': 'minkowski_linear', 'T': 2,
                                         'resources': [{'G': [[1], [-1]], 'h': [1, 0]}]})


class TestLoadRegion:
    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError, match='Cannot read'):
            region_service.load_region(str(tmp_path / 'absent.json'))

    def test_reads_file(self, write_json):
        path = write_json('disk.json', {'type': 'hypersphere', 'n': 2})
        assert region_service.load_region(path).kind == 'hypersphere'


class TestCheckThetas:
    def test_fixed_region(self, unit_disk):
        thetas = region_service.check_thetas(unit_disk)
        assert len(thetas) == 1
        assert thetas[0].size == 0

    def test_corners(self):
        box = ThetaBox([0.0, 0.0], [1.0, 2.0])
        thetas = region_service.check_thetas(HypersphereRegion([0.0], 1.0), box)
        assert len(thetas) == 5
        np.testing.assert_array_equal(thetas[0], [0.5, 1.0])
        assert {tuple(p) for p in thetas[1:]} == {(0, 0), (0, 2), (1, 0), (1, 2)}

    def test_sampled_in_high_dimension(self):
        box = ThetaBox(np.zeros(7), np.ones(7))
        thetas = region_service.check_thetas(HypersphereRegion([0.0], 1.0), box)
        assert len(thetas) == 1 + region_service.SAMPLED_CHECKS
        assert all(box.contains(p) for p in thetas)


class TestNormalization:
    def test_per_axis(self):
        scale, offset = region_service.normalization(HypercubeRegion([0.0, 0.0], [2.0, 4.0]), 'per_axis')
        np.testing.assert_allclose(scale, [2.0, 4.0])
        np.testing.assert_allclose(offset, [0.0, 0.0])

    def test_isotropic(self):
        scale, _ = region_service.normalization(HypercubeRegion([0.0, 0.0], [2.0, 4.0]), 'isotropic')
        np.testing.assert_allclose(scale, [4.0, 4.0])

    def test_auto_picks_isotropic_for_balls(self):
        scale, offset = region_service.normalization(HypersphereRegion([1.0, 1.0], 2.0), 'auto')
        np.testing.assert_allclose(scale, [4.0, 4.0])
        np.testing.assert_allclose(offset, [-1.0, -1.0])

    def test_none(self):
        scale, offset = region_service.normalization(HypersphereRegion([1.0, 1.0], 2.0), 'none')
        np.testing.assert_array_equal(scale, [1.0, 1.0])
        np.testing.assert_array_equal(offset, [0.0, 0.0])

    def test_unknown_mode(self):
        with pytest.raises(UsageError):
            region_service.normalization(HypersphereRegion([0.0], 1.0), 'log')

    def test_modulated_box_covers_every_checked_theta(self):
        region = HypercubeRegion([0.0], [1.0], theta_box=ThetaBox([0.0], [1.0]), modulation={'hi': [[3.0]]})
        scale, offset = region_service.normalization(region, 'per_axis')
        assert scale[0] == pytest.approx(4.0)
        assert offset[0] == pytest.approx(0.0)


class TestNormalizedView:
    def test_isotropic_view_commutes_with_the_map(self):
        ball = HypersphereRegion([1.0, 1.0], 2.0)
        view, scale, offset = region_service.normalized_view(ball, 'isotropic')
        assert isinstance(view, region_service.NormalizedRegion)
        point, value = view.support(None, [1.0, 0.0])
        np.testing.assert_allclose(point, [1.0, 0.5])
        assert value == pytest.approx(1.0)
        np.testing.assert_allclose(view.project(None, [2.0, 0.5]), [1.0, 0.5])
        z = np.array([0.3, 0.9])
        np.testing.assert_allclose(view.project(None, z), (ball.project(None, scale * z + offset) - offset) / scale)

    def test_per_axis_view_is_an_affine_image(self):
        view, _, _ = region_service.normalized_view(HypercubeRegion([0.0, 0.0], [2.0, 4.0]), 'per_axis')
        assert isinstance(view, HypercubeRegion)
        lo, hi = view.bounding_box()
        np.testing.assert_allclose(lo, [0.0, 0.0])
        np.testing.assert_allclose(hi, [1.0, 1.0])

    def test_identity_returns_the_region(self, square_region):
        view, _, _ = region_service.normalized_view(square_region, 'per_axis')
        assert view is square_region

    def test_spec_data_is_the_inner_document(self):
        ball = HypersphereRegion([1.0, 1.0], 2.0)
        view, _, _ = region_service.normalized_view(ball, 'isotropic')
        assert view.to_spec_data() == ball.to_spec_data()
