# Systems package - CGN learning, classification, search and reporting