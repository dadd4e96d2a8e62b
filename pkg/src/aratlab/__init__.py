"""ARAT capture/segmentation/rating workbench.

One shared event database, a task catalog, pure fold/validation logic for
segmentations, a dual-rater rating workflow, a capture-session state machine
and annotator-behavior analytics, exposed over an HTTP API with a CLI for
operator tooling.
"""

__version__ = "0.1.0"
