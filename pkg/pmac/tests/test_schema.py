"""
Tests for pmac/schema.py.
"""
import msgspec
import numpy as np
import pytest

from pmac.cs_enumerator import enumerate_cs_ne
from pmac.errors import StructuralError
from pmac.model import GameConfig, GainMatrix, PowerProfile
from pmac.pa_solver import solve_pa_ne
from pmac.schema import (
    instance_from_doc,
    InstanceDoc,
    load_instance,
    ne_report_doc,
    ne_report_table,
    pa_solution_doc,
    pa_solution_table,
    sic_report_doc,
    sic_report_table,
)
from pmac.sic import DecodingOrder, sic_user_rates


class TestInstanceDocs:
    """Test instance files."""

    def test_load_written_instance(self, instance_file, small_instance):
        config, gains = load_instance(instance_file)
        expected_config, expected_gains = small_instance
        assert config.shape == (3, 2)
        assert config.noise_density == expected_config.noise_density
        assert np.array_equal(gains.gains, expected_gains.gains)

    def test_scalar_budget_broadcasts(self):
        doc = InstanceDoc(K=2, S=3, p_max=[2.0], N0=0.5, B=[1.0], gains=[[1.0] * 3, [2.0] * 3])
        config, _ = instance_from_doc(doc)
        assert config.max_power.tolist() == [2.0, 2.0]
        assert config.bandwidths.tolist() == [1.0, 1.0, 1.0]

    def test_length_mismatch(self):
        doc = InstanceDoc(K=3, S=2, p_max=[1.0, 1.0], N0=1.0, B=[1.0], gains=[[1.0, 1.0]] * 3)
        with pytest.raises(StructuralError):
            instance_from_doc(doc)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "instance.json"
        path.write_text('{"K": 1, "S": 1, "p_max": [1.0], "B": [1.0], "gains": [[1.0]]}')
        with pytest.raises(msgspec.ValidationError):
            load_instance(path)


class TestReportDocs:
    """Test report documents use 1-based labels."""

    def test_ne_report_labels(self):
        config = GameConfig.uniform(2, 2)
        gains = GainMatrix([[4.0, 1.0], [1.0, 4.0]])
        doc = ne_report_doc(enumerate_cs_ne(gains, config))
        assert doc.count == 1
        assert doc.equilibria[0].profile == [1, 2]
        assert doc.equilibria[0].label == "potential-max"

    def test_sic_order_labels(self, small_instance):
        config, gains = small_instance
        report = sic_user_rates(PowerProfile.uniform(config), gains, config, DecodingOrder((2, 0, 1)))
        assert sic_report_doc(report).order == [3, 1, 2]


class TestReportTables:
    """Test the flat renderings of report documents."""

    def test_sic_table_positions(self, small_instance):
        config, gains = small_instance
        report = sic_user_rates(PowerProfile.uniform(config), gains, config, DecodingOrder((2, 0, 1)))
        table = sic_report_table(sic_report_doc(report))
        assert table["player"].tolist() == [1, 2, 3]
        assert table["decode_position"].tolist() == [2, 3, 1]
        assert table["rate"].tolist() == pytest.approx(report.per_user_rates.tolist())

    def test_ne_table_columns(self):
        config = GameConfig.uniform(2, 2)
        gains = GainMatrix([[4.0, 1.0], [1.0, 4.0]])
        table = ne_report_table(ne_report_doc(enumerate_cs_ne(gains, config)))
        assert list(table.columns) == ["equilibrium", "label", "potential", "nse",
                                       "channel_1", "channel_2", "utility_1", "utility_2"]
        assert table.loc[0, ["channel_1", "channel_2"]].tolist() == [1, 2]

    def test_pa_table_is_long(self, small_instance):
        config, gains = small_instance
        table = pa_solution_table(pa_solution_doc(solve_pa_ne(gains, config)))
        assert len(table) == 6
        assert table.groupby("player")["power"].sum().tolist() == pytest.approx([1.0, 1.0, 1.0])
