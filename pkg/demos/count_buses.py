"""
Run one visual program by hand
==============================

Parse a program, run it against a synthetic scene with the oracle tools,
then turn the execution trace into a rationale.
"""

from pathlib import Path

from vpdistill.cot import render_rationale_template
from vpdistill.interpreter import execute
from vpdistill.scene import SceneGraph, SceneObject
from vpdistill.tools import NoiseConfig, OracleBackend, ToolRegistry
from vpdistill.values import VisualInput
from vpdistill.vpl import parse, pretty_print

# a 640x480 street with three buses, only one of them yellow
scene = SceneGraph("s_demo", 640, 480, (
    SceneObject("o0", "bus", (20, 200, 180, 300), frozenset({"yellow"}), 0.3),
    SceneObject("o1", "bus", (220, 190, 400, 310), frozenset({"red"}), 0.5),
    SceneObject("o2", "bus", (430, 210, 620, 320), frozenset({"white"}), 0.7),
    SceneObject("o3", "dog", (300, 380, 360, 450), frozenset({"brown"}), 0.2),
))

program = parse((Path(__file__).parent / "count_buses.vpl").read_text())
print(pretty_print(program))
print("hash:", program.program_hash)

tools = ToolRegistry(OracleBackend([scene]))
result, trace = execute(program, VisualInput.from_scene(scene), tools)
print("answer:", result)
print(trace.dump_lines())

rationale = render_rationale_template(trace, "How many yellow buses are in the picture?", result)
print(rationale.text)

# with a noisy attribute checker the same program can go wrong;
# the noise is seeded, so this run is the same every time
noisy = ToolRegistry(OracleBackend([scene], NoiseConfig(seed=3, p_attr_flip=0.4)))
result, trace = execute(program, VisualInput.from_scene(scene), noisy)
print("noisy answer:", result)
