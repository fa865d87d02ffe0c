# Configuration settings and run configuration
