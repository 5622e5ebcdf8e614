package com.coreoz.wisp;

import static org.assertj.core.api.Assertions.assertThat;

import org.junit.Test;

public class JobStatusTest {

	@Test
	public void done_is_the_last_status() {
		JobStatus[] values = JobStatus.values();
		assertThat(values[values.length - 1]).isEqualTo(JobStatus.DONE);
	}
}
