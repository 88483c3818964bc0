from .sessionize import sessionize
from .featurize import featurize
from .factorize import fit_model, select_k_model
from .report import report
from .synthesize import synthesize
from .pipeline import pipeline
