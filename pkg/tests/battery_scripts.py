"""Mock script sets driving the live battery tests.

CORRECT answers every battery utterance with the right tool and workable
parameters (paths refer to the files every battery session is seeded with).
The adversarial sets each force one abnormal outcome class.
"""

import json


def call(tool, **arguments):
    return json.dumps({"action": tool, "action_input": arguments})


def final(answer):
    return json.dumps({"action": "final", "answer": answer})


ASU_BBOX = [-111.9431, 33.4154, -111.9239, 33.4280]

CORRECT = [
    ("run the sumo simulation", call("simulateOnSUMO", path="map.osm", horizon_s=60)),
    ("show arizona state university", call("showOnMap", bbox=ASU_BBOX)),
    ("analyze the metrics log", call("logAnalyzer", path_a="metrics.json")),
    ("plot the training curves", call("visualizeTrainingCurves", path="training_curve.csv")),
    ("train a signal control policy", call("simulateOnLibsignal", algorithm="qlearning", episodes=2)),
    ("explain the simulation results", call("resultExplainer", path="metrics.json")),
    # Ablation battery utterances
    ("where is arizona state university", call("queryAreaRange", place="Arizona State University, Tempe Campus")),
    ("download the osm file", call("autoDownloadOpenStreetMapFile", bbox=ASU_BBOX)),
    ("fixed-time signal control", call("simulateOnLibsignal", algorithm="fixedtime", episodes=1)),
]

# The model answers a tool-requiring task in plain prose.
NO_API_CALL = [
    ("run the sumo simulation", "The simulation likely shows smooth traffic."),
    (".", "I would rather not call anything."),
]

# The model insists on the wrong (but registered) tool, repairs included.
MISMATCH = [
    ("show arizona state university", call("queryAreaRange", place="Arizona State University")),
    ("observation: the bounding box", final("The coordinates are above.")),
    ("not accomplished", final("The coordinates are above.")),
    (".", final("The coordinates are above.")),
]

# Right tool, wrong information: a two-value box fails validation.
ERROR_RAISE = [
    ("show arizona state university", call("showOnMap", bbox=[33.4, -111.9])),
    (".", call("showOnMap", bbox=[33.4, -111.9])),
]
