import pytest

from asmarket.scenario import (
    ScenarioError,
    ScenarioValidationError,
    gb_template,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_scenario,
)
from conftest import binding_scenario, toy10_scenario


def test_round_trip_identity(tmp_path):
    for sc in (binding_scenario(), toy10_scenario(horizon=6)):
        path = tmp_path / "sc.json"
        write_scenario(sc, path)
        assert load_scenario(path) == sc


def test_malformed_document(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_scenario(path)


def test_validation_reports_every_violation(tmp_path):
    sc = toy10_scenario(horizon=4)
    doc = scenario_to_dict(sc)
    doc["storage_units"][1]["eta_charge"] = 1.3
    doc["generators"][0]["p_msg_mw"] = 9999.0
    doc["demand_mw"][2] = 0.0
    with pytest.raises(ScenarioValidationError) as err:
        scenario_from_dict(doc)
    diags = "\n".join(err.value.diagnostics)
    assert "storage_units[1].eta_charge" in diags
    assert "generators[0].p_msg_mw" in diags
    assert "demand_mw[2]" in diags


def test_all_zero_demand_rejected():
    sc = binding_scenario()
    doc = scenario_to_dict(sc)
    doc["demand_mw"] = [0.0] * sc.horizon
    doc["generators"] = []
    with pytest.raises(ScenarioValidationError) as err:
        scenario_from_dict(doc)
    assert any("demand" in d for d in err.value.diagnostics)


def test_bess_pfr_and_phes_efr_mapping():
    sc = binding_scenario()
    doc = scenario_to_dict(sc)
    doc["storage_units"][0]["pfr_max_mw"] = 10.0  # BESS must not carry PFR
    with pytest.raises(ScenarioValidationError) as err:
        scenario_from_dict(doc)
    assert any("pfr_max_mw" in d for d in err.value.diagnostics)


def test_unknown_and_missing_fields(tmp_path):
    doc = scenario_to_dict(binding_scenario())
    doc["generators"][0].pop("p_max_mw")
    doc["generators"][1]["made_up"] = 1
    with pytest.raises(ScenarioValidationError) as err:
        scenario_from_dict(doc)
    diags = "\n".join(err.value.diagnostics)
    assert "generators[0].p_max_mw: missing" in diags
    assert "generators[1].made_up: unknown" in diags


def test_schema_version_enforced():
    doc = scenario_to_dict(binding_scenario())
    doc["schema_version"] = 99
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_truncated_slices_all_series():
    sc = toy10_scenario(horizon=24)
    cut = sc.truncated(5)
    assert cut.horizon == 5
    assert len(cut.demand_mw) == 5
    assert all(len(r.cf) == 5 for r in cut.res_units)
    assert cut.validate() == []


class TestGBTemplate:
    def test_system_params(self):
        params = gb_template(horizon=24).params
        assert params.f0_hz == 50.0
        assert params.rocof_max_hz_per_s == 1.0
        assert params.delta_f_max_hz == 0.8
        assert params.t_efr_s == 1.0
        assert params.t_pfr_s == 10.0

    def test_big_nuclear(self):
        sc = gb_template(horizon=24)
        big = [g for g in sc.generators if g.technology == "Big Nuclear"]
        assert len(big) == 1
        assert big[0].p_max_mw == 1800.0
        assert big[0].inertia_s == 5.0
        assert big[0].inertia_offer_gbp_per_mws == 1.0
        assert big[0].energy_offer_gbp_per_mwh == 78.0

    def test_ccgt_response_capacity(self):
        sc = gb_template(horizon=24)
        ccgt = [g for g in sc.generators if g.technology == "CCGT"]
        assert all(g.pfr_max_mw == 300.0 for g in ccgt)  # 30% of 1000
        assert all(g.p_msg_mw == 500.0 for g in ccgt)

    def test_bess_efr(self):
        sc = gb_template(horizon=24)
        units = [s for s in sc.storage_units if s.kind == "BESS"]
        assert all(s.efr_max_mw == 5.0 for s in units)  # 5% of 100
        assert all(s.efr_offer_gbp_per_mw == 10.0 for s in units)

    def test_installed_capacities(self):
        sc = gb_template(horizon=24)
        by_tech = {}
        for u in sc.all_units:
            by_tech[u.technology] = by_tech.get(u.technology, 0.0) + u.p_max_mw
        assert by_tech["Big Nuclear"] == 1800.0
        assert by_tech["Nuclear"] == 3200.0
        assert by_tech["CCGT"] == 25000.0
        assert by_tech["OCGT"] == 1000.0
        assert by_tech["Biomass"] == 3000.0
        assert by_tech["BECCS"] == 1000.0
        assert by_tech["Offshore Wind"] == 50400.0
        assert by_tech["Onshore Wind"] == 30000.0
        assert by_tech["Solar PV"] == 42000.0
        assert by_tech["PHES"] == 4800.0
        assert by_tech["BESS"] == 20000.0

    def test_demand_profile(self):
        sc = gb_template()
        assert sc.horizon == 168
        assert max(sc.demand_mw) == pytest.approx(62700.0)
        assert min(sc.demand_mw) > 0.0

    def test_validates_and_round_trips(self, tmp_path):
        sc = gb_template(horizon=24)
        assert sc.validate() == []
        path = tmp_path / "gb.json"
        write_scenario(sc, path)
        assert load_scenario(path) == sc
