namespace atx {}
