# Feature extraction, regression and evaluation
