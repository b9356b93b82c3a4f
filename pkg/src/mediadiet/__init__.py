"""Media-diet language modeling and survey-linkage toolkit.

Adapts language models to outlet/medium/time-window "media diets", probes
them with one-blank cloze prompts derived from survey questions, and links
the resulting normalized scores to survey response proportions through
correlation, regression, GAM, and rolling-forecast analyses.
"""

__version__ = "0.1.0"
