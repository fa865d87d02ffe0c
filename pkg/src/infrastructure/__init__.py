# Graph, cascade and result file storage
