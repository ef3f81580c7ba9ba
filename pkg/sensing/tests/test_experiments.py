from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from sensing.dp_policy import CostModel
from sensing.exceptions import ContractViolation, InvalidScenario
from sensing.experiments import C_VALUES, M_VALUES, PRESETS, ExperimentSpec, Preset, RunSettings, build_table
from sensing.fusion_sim import DetectorKind, SweepAxis
from sensing.scenario import ScenarioConfig

SMALL = RunSettings(workers=1, chunk_size=500, grid_size=201)


class ExperimentSpecTest(SimpleTestCase):

    def test_every_preset_has_a_builder(self):
        self.assertEqual(set(PRESETS), set(Preset))

    def test_names_are_coerced(self):
        spec = ExperimentSpec(preset='fig-sensing-vs-c', detector='dp', axis='c')
        self.assertIs(spec.preset, Preset.SENSING_VS_C)
        self.assertIs(spec.detector, DetectorKind.DP)
        self.assertIs(spec.axis, SweepAxis.C)

    def test_default_sweep_values(self):
        self.assertEqual(ExperimentSpec(preset='fig-perror-vs-M').sweep_values(), M_VALUES)
        self.assertEqual(ExperimentSpec(preset='fig-sensing-vs-c').sweep_values(), C_VALUES)
        self.assertEqual(ExperimentSpec(values=(3, 5)).sweep_values(), (3, 5))

    def test_trials_and_seed_bounds(self):
        with self.assertRaises(ContractViolation):
            ExperimentSpec(trials=0)
        with self.assertRaises(ContractViolation):
            ExperimentSpec(seed=2 ** 64)
        with self.assertRaises(ValueError):
            ExperimentSpec(preset='fig-unknown')


class BuildTableTest(SimpleTestCase):

    def setUp(self):
        self.scenario = ScenarioConfig()
        self.cost = CostModel()

    def build(self, preset, values, trials=500, seed=21):
        spec = ExperimentSpec(preset=preset, trials=trials, seed=seed, values=values)
        return build_table(spec, self.scenario, self.cost, settings=SMALL)

    def test_error_vs_sensors_columns(self):
        table, parameters = self.build('fig-perror-vs-M', (10, 20))
        self.assertEqual(list(table.columns), ['M', 'p_error_bs', 'p_error_dp', 'stderr_bs', 'stderr_dp', 'trials', 'seed'])
        self.assertEqual(table['M'].tolist(), [10, 20])
        self.assertEqual(parameters['columns'], list(table.columns))
        self.assertEqual(parameters['runtime']['grid_size'], 201)
        self.assertEqual(parameters['experiment']['values'], [10, 20])

    def test_same_seed_same_table(self):
        first, _ = self.build('fig-probed-vs-M', (10,))
        second, _ = self.build('fig-probed-vs-M', (10,))
        self.assertTrue(first.equals(second))

    def test_sensing_time_shrinks_with_cost(self):
        table, parameters = self.build('fig-sensing-vs-c', (0.0, 1e-3), trials=2000)
        self.assertAlmostEqual(table['avg_sensing_time'].iloc[0], 1.0, places=12)
        self.assertLess(table['avg_sensing_time'].iloc[1], 1.0)
        self.assertEqual(parameters['preset_fixed']['M'], 8)

    def test_thresholds_vs_stage(self):
        table, _ = self.build('fig-thresholds-vs-stage', (0.0, 1e-3))
        two = table[table['scheme'] == 'two-threshold']
        one = table[table['scheme'] == 'one-threshold']
        self.assertEqual(len(two), 16)
        self.assertEqual(len(one), 8)
        self.assertTrue(np.all(one['pi_low'].to_numpy()[:-1] == 0.0))
        self.assertEqual(sorted(set(table['k'])), list(range(1, 9)))

    def test_stages_vs_horizon_series(self):
        table, parameters = self.build('fig-probed-vs-K', (2, 4), trials=300)
        self.assertEqual(len(table), 6)
        self.assertEqual(set(table['model']), {'energy', 'shift-in-mean'})
        self.assertTrue(np.all(table['avg_probed'] <= table['K']))
        self.assertEqual(parameters['preset_fixed']['M'], 100)

    def test_file_network_replaces_preset_network(self):
        scenario = ScenarioConfig(M=12, K=6)
        overrides = {'scenario.M': '12', 'scenario.K': '6'}
        spec = ExperimentSpec(preset='fig-sensing-vs-c', trials=300, seed=3, values=(1e-3,), overrides=overrides)
        _, parameters = build_table(spec, scenario, self.cost, settings=SMALL)
        self.assertEqual(parameters['preset_fixed']['M'], 12)
        self.assertEqual(parameters['preset_fixed']['K'], 6)
        spec = replace(spec, preset='fig-thresholds-vs-stage', values=(0.0,))
        table, parameters = build_table(spec, scenario, self.cost, settings=SMALL)
        self.assertEqual(sorted(set(table['k'])), list(range(1, 7)))
        self.assertEqual(parameters['preset_fixed']['M'], 12)

    def test_file_horizon_above_preset_sensors_rejected(self):
        spec = ExperimentSpec(preset='fig-sensing-vs-c', trials=100, values=(1e-3,), overrides={'scenario.K': '10'})
        with self.assertRaises(InvalidScenario):
            build_table(spec, ScenarioConfig(M=12, K=10, tau=0.05), self.cost, settings=SMALL)
